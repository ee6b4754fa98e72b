//! Constrained replacement kernels.
//!
//! [`swig_replace`] is Slice-within-Gibbs: each sweep updates the
//! hyperparameters against the full constraint, then visits every local
//! block with a per-group budget `B_k = ℓ* − S + ℓ_k`, so a local constraint
//! check costs exactly one group-likelihood call. [`nss_replace`] is the
//! joint-space baseline, where every check is a full `J`-call evaluation.
//!
//! Kernels mutate a [`ParamState`] in place and accumulate counters into a
//! [`KernelStats`].

use std::cell::Cell;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{blanket_prior_raw, joint_log_prior, Model, ModelDims, ParamState, Structure};
use crate::slice::{draw_direction, slice_direction, BlockCovariance, SliceParams, SliceStep, SliceTarget};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// Gibbs sweeps per replacement (`M`).
    pub sweeps: usize,
    /// Hyperparameter slice steps per sweep; `None` means `d_psi`.
    pub psi_steps: Option<usize>,
    /// Slice steps per local block per sweep; `None` means `d_theta`.
    pub theta_steps: Option<usize>,
    /// Joint-space steps per baseline replacement; `None` means `M * d_total`.
    pub nss_steps: Option<usize>,
    /// Visit local blocks in a random order instead of ascending.
    pub shuffle_sweep: bool,
    pub slice: SliceParams,
    /// Check cache, budget and feasibility invariants after every local step.
    pub audit: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sweeps: 5,
            psi_steps: None,
            theta_steps: None,
            nss_steps: None,
            shuffle_sweep: false,
            slice: SliceParams::default(),
            audit: false,
        }
    }
}

impl KernelConfig {
    pub fn psi_steps_for(&self, dims: ModelDims) -> usize {
        self.psi_steps.unwrap_or(dims.d_psi)
    }

    pub fn theta_steps_for(&self, dims: ModelDims) -> usize {
        self.theta_steps.unwrap_or(dims.d_theta)
    }

    pub fn nss_steps_for(&self, dims: ModelDims) -> usize {
        self.nss_steps.unwrap_or(self.sweeps * dims.d_total())
    }

    pub fn validate(&self, dims: ModelDims) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("kernel.{what} must be at least 1")));
        if self.sweeps == 0 {
            return bad("sweeps");
        }
        if dims.d_psi > 0 && self.psi_steps_for(dims) == 0 {
            return bad("psi_steps");
        }
        if self.theta_steps_for(dims) == 0 {
            return bad("theta_steps");
        }
        if self.nss_steps_for(dims) == 0 {
            return bad("nss_steps");
        }
        if self.slice.max_shrink == 0 {
            return bad("slice.max_shrink");
        }
        Ok(())
    }
}

/// Work and diagnostic counters. Merged by summation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelStats {
    pub group_calls: u64,
    pub psi_checks: u64,
    pub local_checks: u64,
    pub joint_checks: u64,
    /// Exact `O(J)` cache refreshes after hyperparameter updates.
    pub recomputes: u64,
    pub slice_steps: u64,
    pub stepouts: u64,
    pub shrinks: u64,
    pub stalls: u64,
    pub audit_checks: u64,
    pub audit_group_calls: u64,
    pub cache_violations: u64,
    pub feasibility_violations: u64,
    pub budget_violations: u64,
    pub call_count_violations: u64,
}

impl KernelStats {
    pub fn merge(&mut self, o: &KernelStats) {
        self.group_calls += o.group_calls;
        self.psi_checks += o.psi_checks;
        self.local_checks += o.local_checks;
        self.joint_checks += o.joint_checks;
        self.recomputes += o.recomputes;
        self.slice_steps += o.slice_steps;
        self.stepouts += o.stepouts;
        self.shrinks += o.shrinks;
        self.stalls += o.stalls;
        self.audit_checks += o.audit_checks;
        self.audit_group_calls += o.audit_group_calls;
        self.cache_violations += o.cache_violations;
        self.feasibility_violations += o.feasibility_violations;
        self.budget_violations += o.budget_violations;
        self.call_count_violations += o.call_count_violations;
    }

    pub fn violations(&self) -> u64 {
        self.cache_violations
            + self.feasibility_violations
            + self.budget_violations
            + self.call_count_violations
    }

    fn record(&mut self, step: &SliceStep) {
        self.slice_steps += 1;
        self.stepouts += step.stepouts as u64;
        self.shrinks += step.shrinks as u64;
        self.stalls += step.stalled as u64;
    }
}

/// Per-group log-likelihood floor for a move of block `k` alone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Budget(pub f64);

/// `B_k = ℓ* − S + ℓ_k`.
#[inline]
pub fn compute_budget(lstar: f64, s: f64, ell_k: f64) -> Budget {
    Budget(lstar - s + ell_k)
}

/// Constraint test. A parent tied with the threshold (only possible on
/// likelihood plateaus or at `ℓ* = −inf`) is moved under `≥` so that it can
/// still explore the plateau; strictly feasible parents use `>`.
#[inline]
fn above(v: f64, bound: f64, strict: bool) -> bool {
    if strict {
        v > bound
    } else {
        v >= bound
    }
}

/// Budget with the `−inf` threshold handled without forming `−inf − (−inf)`.
#[inline]
fn budget_for(lstar: f64, s: f64, ell_k: f64) -> f64 {
    if lstar == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        compute_budget(lstar, s, ell_k).0
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn cache_consistent(state: &ParamState) -> bool {
    let sum: f64 = state.ell.iter().sum();
    close(state.loglike, sum, 1e-9)
}

/// Hyperparameter update: `M_psi` directional slice steps on
/// `log π(psi) + log π(theta | psi)` under `Σ_j ℓ_j(theta_j, psi) > ℓ*`, then
/// an exact refresh of every `ℓ_j` and `S`.
pub fn psi_update<M, R>(
    model: &M,
    state: &mut ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &KernelConfig,
    rng: &mut R,
    stats: &mut KernelStats,
) -> Result<()>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    let dims = model.dims();
    let d_psi = dims.d_psi;
    if d_psi == 0 {
        return Ok(());
    }
    let block = cov
        .psi_block()
        .ok_or_else(|| Error::Contract("covariance has no hyperparameter block".into()))?;
    let n = dims.n_groups;
    let d = dims.d_theta;
    let full = model.force_full_recompute_on_psi() || model.loglike_depends_on_psi();
    let s_fixed = state.loglike;
    let strict = s_fixed > lstar;
    let mut lp = state.log_prior;
    let mut dir = vec![0.0; d_psi];
    let mut scratch = Vec::new();

    for _ in 0..cfg.psi_steps_for(dims) {
        draw_direction(block, rng, &mut dir);
        let (psi, thetas) = state.values_mut().split_at_mut(d_psi);
        let thetas: &[f64] = thetas;
        let mut checks = 0u64;
        let nan = Cell::new(false);
        let mut target = SliceTarget {
            logf: |p: &[f64]| {
                let v = joint_log_prior(model, p, thetas);
                nan.set(nan.get() | v.is_nan());
                v
            },
            constraint: |p: &[f64]| {
                checks += 1;
                if !full {
                    return above(s_fixed, lstar, strict);
                }
                let s: f64 = thetas
                    .chunks_exact(d)
                    .enumerate()
                    .map(|(j, th)| model.group_loglike(th, p, j))
                    .sum();
                nan.set(nan.get() | s.is_nan());
                above(s, lstar, strict)
            },
            width0: 1.0,
        };
        let step = slice_direction(psi, lp, &dir, &mut target, &cfg.slice, &mut scratch, rng);
        drop(target);
        if nan.get() {
            return Err(Error::nan("hyperparameter update"));
        }
        stats.psi_checks += checks;
        if full {
            stats.group_calls += checks * n as u64;
        }
        stats.record(&step);
        lp = step.logf;
    }

    state.log_prior = lp;
    if full {
        state.refresh_loglike(model)?;
        stats.group_calls += n as u64;
        stats.recomputes += 1;
    }
    Ok(())
}

fn sweep_locals<M, R>(
    model: &M,
    state: &mut ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &KernelConfig,
    rng: &mut R,
    stats: &mut KernelStats,
    markov: bool,
) -> Result<()>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    let dims = model.dims();
    let n = dims.n_groups;
    let d = dims.d_theta;
    let d_psi = dims.d_psi;
    let steps = cfg.theta_steps_for(dims);
    let mut order: Vec<usize> = (0..n).collect();
    if cfg.shuffle_sweep {
        order.shuffle(rng);
    }
    let strictly_feasible = state.loglike > lstar;
    let mut dir = vec![0.0; d];
    let mut scratch = Vec::new();

    for &k in &order {
        for _ in 0..steps {
            let ell_k = state.ell[k];
            if ell_k == f64::NEG_INFINITY && lstar > f64::NEG_INFINITY {
                return Err(Error::Contract(format!(
                    "group {k} has -inf log-likelihood at a feasible state"
                )));
            }
            let budget = budget_for(lstar, state.loglike, ell_k);
            if cfg.audit && lstar > f64::NEG_INFINITY {
                let others: f64 = state
                    .ell
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, l)| l)
                    .sum();
                if !close(budget, lstar - others, 1e-9) {
                    stats.budget_violations += 1;
                }
            }
            draw_direction(cov.local_block(k), rng, &mut dir);

            let (psi, thetas) = state.values_mut().split_at_mut(d_psi);
            let psi: &[f64] = psi;
            let (before, rest) = thetas.split_at_mut(k * d);
            let (cur, after) = rest.split_at_mut(d);
            let prev: Option<&[f64]> = (markov && k > 0).then(|| &before[(k - 1) * d..]);
            let next: Option<&[f64]> = (markov && k + 1 < n).then(|| &after[..d]);
            let local_logf = |x: &[f64]| {
                if markov {
                    blanket_prior_raw(model, prev, x, next, psi)
                } else {
                    model.log_conditional_prior(x, psi, k)
                }
            };
            let lp0 = local_logf(cur);
            if lp0.is_nan() {
                return Err(Error::nan(format!("local log prior of block {k}")));
            }
            let mut new_ell = ell_k;
            let mut checks = 0u64;
            let nan = Cell::new(false);
            let mut target = SliceTarget {
                logf: |x: &[f64]| {
                    let v = local_logf(x);
                    nan.set(nan.get() | v.is_nan());
                    v
                },
                constraint: |x: &[f64]| {
                    checks += 1;
                    let l = model.group_loglike(x, psi, k);
                    nan.set(nan.get() | l.is_nan());
                    new_ell = l;
                    above(l, budget, strictly_feasible)
                },
                width0: 1.0,
            };
            let step = slice_direction(cur, lp0, &dir, &mut target, &cfg.slice, &mut scratch, rng);
            drop(target);
            if nan.get() {
                return Err(Error::nan(format!("local update of block {k}")));
            }
            stats.local_checks += checks;
            stats.group_calls += checks;
            stats.record(&step);
            if !step.stalled {
                state.ell[k] = new_ell;
                if ell_k.is_finite() && state.loglike.is_finite() {
                    let rest_s = state.loglike - ell_k;
                    state.loglike = rest_s + new_ell;
                } else {
                    state.loglike = state.ell.iter().sum();
                }
                state.log_prior += step.logf - lp0;
            }

            if cfg.audit {
                stats.audit_checks += 1;
                if checks != step.constraint_evals as u64 {
                    stats.call_count_violations += 1;
                }
                let fresh = model.group_loglike(state.theta(k), state.psi(), k);
                stats.audit_group_calls += 1;
                if fresh != state.ell[k] || !cache_consistent(state) {
                    stats.cache_violations += 1;
                }
                if strictly_feasible && !(state.loglike > lstar) {
                    stats.feasibility_violations += 1;
                }
            }
            debug_assert!(!strictly_feasible || state.loglike > lstar);
        }
    }
    Ok(())
}

/// One pass over the local blocks of an iid model, each under its budget.
pub fn local_sweep<M, R>(
    model: &M,
    state: &mut ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &KernelConfig,
    rng: &mut R,
    stats: &mut KernelStats,
) -> Result<()>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    if model.structure() != Structure::Iid {
        return Err(Error::Contract("local_sweep requires an iid model".into()));
    }
    sweep_locals(model, state, lstar, cov, cfg, rng, stats, false)
}

/// One sequential pass over the sites of a Markov model; each site targets
/// its blanket conditional under its budget.
pub fn markov_local_sweep<M, R>(
    model: &M,
    state: &mut ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &KernelConfig,
    rng: &mut R,
    stats: &mut KernelStats,
) -> Result<()>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    if model.structure() != Structure::Markov {
        return Err(Error::Contract(
            "markov_local_sweep requires a Markov model".into(),
        ));
    }
    sweep_locals(model, state, lstar, cov, cfg, rng, stats, true)
}

fn audit_replacement<M: Model + ?Sized>(
    model: &M,
    state: &ParamState,
    lstar: f64,
    strictly_feasible: bool,
    stats: &mut KernelStats,
) {
    stats.audit_checks += 1;
    let psi = state.psi();
    let mut sum = 0.0;
    let mut exact = true;
    for j in 0..state.n_groups() {
        let l = model.group_loglike(state.theta(j), psi, j);
        exact &= l == state.ell[j];
        sum += l;
    }
    stats.audit_group_calls += state.n_groups() as u64;
    if !exact || !close(state.loglike, sum, 1e-9) {
        stats.cache_violations += 1;
    }
    if strictly_feasible && !(sum > lstar) {
        stats.feasibility_violations += 1;
    }
}

/// `M` alternations of [`psi_update`] and the structure's local sweep.
pub fn swig_replace<M, R>(
    model: &M,
    state: &mut ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &KernelConfig,
    rng: &mut R,
    stats: &mut KernelStats,
) -> Result<()>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    let markov = model.structure() == Structure::Markov;
    let strictly_feasible = state.loglike > lstar;
    for _ in 0..cfg.sweeps {
        psi_update(model, state, lstar, cov, cfg, rng, stats)?;
        if cfg.audit && strictly_feasible && !(state.loglike > lstar) {
            stats.feasibility_violations += 1;
        }
        sweep_locals(model, state, lstar, cov, cfg, rng, stats, markov)?;
    }
    if cfg.audit {
        audit_replacement(model, state, lstar, strictly_feasible, stats);
    }
    Ok(())
}

/// Joint-space baseline: hit-and-run slice steps on the full parameter
/// vector with the joint prior as density and the full likelihood as
/// constraint.
pub fn nss_replace<M, R>(
    model: &M,
    state: &mut ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &KernelConfig,
    rng: &mut R,
    stats: &mut KernelStats,
) -> Result<()>
where
    M: Model + ?Sized,
    R: Rng + ?Sized,
{
    let dims = model.dims();
    let n = dims.n_groups;
    let d = dims.d_theta;
    let d_psi = dims.d_psi;
    let strictly_feasible = state.loglike > lstar;
    let mut dir = vec![0.0; dims.d_total()];
    let mut ell = vec![0.0; n];
    let mut scratch = Vec::new();

    for _ in 0..cfg.nss_steps_for(dims) {
        cov.draw_joint_direction(rng, &mut dir);
        let lp0 = state.log_prior;
        let mut new_s = state.loglike;
        let mut checks = 0u64;
        let nan = Cell::new(false);
        let mut target = SliceTarget {
            logf: |x: &[f64]| {
                let v = joint_log_prior(model, &x[..d_psi], &x[d_psi..]);
                nan.set(nan.get() | v.is_nan());
                v
            },
            constraint: |x: &[f64]| {
                checks += 1;
                let (psi, thetas) = x.split_at(d_psi);
                let mut s = 0.0;
                for (j, (th, e)) in thetas.chunks_exact(d).zip(ell.iter_mut()).enumerate() {
                    *e = model.group_loglike(th, psi, j);
                    s += *e;
                }
                nan.set(nan.get() | s.is_nan());
                new_s = s;
                above(s, lstar, strictly_feasible)
            },
            width0: 1.0,
        };
        let step = slice_direction(
            state.values_mut(),
            lp0,
            &dir,
            &mut target,
            &cfg.slice,
            &mut scratch,
            rng,
        );
        drop(target);
        if nan.get() {
            return Err(Error::nan("joint-space update"));
        }
        stats.joint_checks += checks;
        stats.group_calls += checks * n as u64;
        stats.record(&step);
        if !step.stalled {
            state.ell.copy_from_slice(&ell);
            state.loglike = new_s;
            state.log_prior = step.logf;
        }
        if cfg.audit {
            stats.audit_checks += 1;
            if checks != step.constraint_evals as u64 {
                stats.call_count_violations += 1;
            }
            if !cache_consistent(state) {
                stats.cache_violations += 1;
            }
            if strictly_feasible && !(state.loglike > lstar) {
                stats.feasibility_violations += 1;
            }
        }
    }
    if cfg.audit {
        audit_replacement(model, state, lstar, strictly_feasible, stats);
    }
    Ok(())
}
