//! The contract a target model satisfies so that kernels and the nested
//! sampling loop stay model-agnostic.
//!
//! A model has hyperparameters `psi` (possibly empty) and `J` local blocks
//! `theta_j`, each of the same dimension. The log-likelihood is a sum of
//! per-group terms `ell_j(theta_j, psi)`. The prior over the local blocks is
//! either conditionally independent given `psi` ([`Structure::Iid`]) or a
//! first-order Markov chain ([`Structure::Markov`]).
//!
//! The trait methods are the raw hooks called on the hot path; they return
//! plain `f64` and let NaN propagate. The free functions in this module are
//! the checked entry points: they validate indices, structure and inputs and
//! turn NaN into [`Error::NaN`].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Structure {
    Iid,
    Markov,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_psi: usize,
    pub n_groups: usize,
    pub d_theta: usize,
}

impl ModelDims {
    pub fn new(d_psi: usize, n_groups: usize, d_theta: usize) -> Result<Self> {
        if n_groups == 0 || d_theta == 0 {
            return Err(Error::Contract(format!(
                "model needs at least one group and one local dimension (J={n_groups}, d_theta={d_theta})"
            )));
        }
        Ok(Self {
            d_psi,
            n_groups,
            d_theta,
        })
    }

    pub fn d_total(&self) -> usize {
        self.d_psi + self.n_groups * self.d_theta
    }
}

/// Exact KL decomposition `H = H_psi + Σ_j H_j`, for models where it is
/// available in closed form.
#[derive(Clone, Debug, Serialize)]
pub struct AnalyticInformation {
    pub h_psi: f64,
    pub h_groups: Vec<f64>,
}

impl AnalyticInformation {
    pub fn total(&self) -> f64 {
        self.h_psi + self.h_groups.iter().sum::<f64>()
    }
}

pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn dims(&self) -> ModelDims;

    fn structure(&self) -> Structure;

    /// `log π(psi)`, `-inf` outside the support.
    fn log_prior_hyper(&self, psi: &[f64]) -> f64;

    /// `log π(theta_j | psi)`. Only meaningful for [`Structure::Iid`].
    fn log_conditional_prior(&self, _theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        f64::NAN
    }

    /// `log π(theta_0 | psi)`. Only meaningful for [`Structure::Markov`].
    fn log_initial(&self, _theta0: &[f64], _psi: &[f64]) -> f64 {
        f64::NAN
    }

    /// `log π(theta_t | theta_{t-1}, psi)`. Only meaningful for [`Structure::Markov`].
    fn log_transition(&self, _prev: &[f64], _cur: &[f64], _psi: &[f64]) -> f64 {
        f64::NAN
    }

    /// `ell_j(theta_j, psi) = log p(D_j | theta_j, psi)`.
    fn group_loglike(&self, theta: &[f64], psi: &[f64], j: usize) -> f64;

    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    /// Draws `theta_j` from its conditional prior. `prev` is `theta_{j-1}`
    /// for Markov models and `None` otherwise (and for `j = 0`).
    fn sample_local(
        &self,
        j: usize,
        prev: Option<&[f64]>,
        psi: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    );

    /// Whether any `ell_j` changes with `psi`.
    fn loglike_depends_on_psi(&self) -> bool {
        true
    }

    /// Recompute all `J` group terms on every hyperparameter constraint check
    /// even when they do not depend on `psi`, so that evaluation accounting
    /// reflects the common case of hyperparameter-dependent likelihoods.
    fn force_full_recompute_on_psi(&self) -> bool {
        true
    }

    fn analytic_logz(&self) -> Option<f64> {
        None
    }

    fn analytic_information(&self) -> Option<AnalyticInformation> {
        None
    }

    /// The bound observations, if the model carries a synthetic dataset.
    fn dataset(&self) -> Option<Dataset> {
        None
    }
}

/// A point in parameter space with its cached per-group log-likelihoods.
///
/// Values are stored contiguously as `[psi, theta_0, ..., theta_{J-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamState {
    values: Vec<f64>,
    d_psi: usize,
    d_theta: usize,
    pub(crate) ell: Vec<f64>,
    pub(crate) loglike: f64,
    pub(crate) log_prior: f64,
}

impl ParamState {
    /// Builds a state from a full parameter vector, computing every cache
    /// from scratch.
    pub fn from_values<M: Model + ?Sized>(model: &M, values: Vec<f64>) -> Result<Self> {
        let dims = model.dims();
        if values.len() != dims.d_total() {
            return Err(Error::DimensionMismatch {
                expected: dims.d_total(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::nan("parameter vector"));
        }
        let mut state = Self {
            values,
            d_psi: dims.d_psi,
            d_theta: dims.d_theta,
            ell: vec![0.0; dims.n_groups],
            loglike: 0.0,
            log_prior: 0.0,
        };
        let (total, ell) = total_loglike(model, &state)?;
        state.ell = ell;
        state.loglike = total;
        state.log_prior = joint_log_prior(model, &state.values[..dims.d_psi], &state.values[dims.d_psi..]);
        if state.log_prior.is_nan() {
            return Err(Error::nan("log prior"));
        }
        Ok(state)
    }

    /// Recomputes every `ell_j` and `S` from scratch (`J` group calls).
    pub(crate) fn refresh_loglike<M: Model + ?Sized>(&mut self, model: &M) -> Result<()> {
        let (psi, thetas) = self.values.split_at(self.d_psi);
        let mut total = 0.0;
        for (j, (th, e)) in thetas.chunks_exact(self.d_theta).zip(self.ell.iter_mut()).enumerate() {
            let l = model.group_loglike(th, psi, j);
            if l.is_nan() {
                return Err(Error::nan(format!("group_loglike({j})")));
            }
            *e = l;
            total += l;
        }
        self.loglike = total;
        Ok(())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn psi(&self) -> &[f64] {
        &self.values[..self.d_psi]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.values[self.d_psi..]
    }

    pub fn theta(&self, j: usize) -> &[f64] {
        let start = self.d_psi + j * self.d_theta;
        &self.values[start..start + self.d_theta]
    }

    pub fn n_groups(&self) -> usize {
        self.ell.len()
    }

    pub fn d_psi(&self) -> usize {
        self.d_psi
    }

    pub fn d_theta(&self) -> usize {
        self.d_theta
    }

    /// Cached per-group log-likelihoods.
    pub fn ell(&self) -> &[f64] {
        &self.ell
    }

    /// Cached total log-likelihood `S`.
    pub fn loglike(&self) -> f64 {
        self.loglike
    }

    pub fn log_prior(&self) -> f64 {
        self.log_prior
    }

    /// `|S - Σ ell_j| / max(1, |S|)`; zero when both sides are `-inf`.
    pub fn cache_error(&self) -> f64 {
        let sum: f64 = self.ell.iter().sum();
        if sum == self.loglike {
            return 0.0;
        }
        (self.loglike - sum).abs() / self.loglike.abs().max(1.0)
    }
}

fn check_finite_input(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|v| v.is_nan()) {
        Err(Error::nan(format!("{what} input")))
    } else {
        Ok(())
    }
}

fn check_output(v: f64, what: &str) -> Result<f64> {
    if v.is_nan() {
        Err(Error::nan(what.to_string()))
    } else {
        Ok(v)
    }
}

fn check_len(xs: &[f64], expected: usize) -> Result<()> {
    if xs.len() != expected {
        Err(Error::DimensionMismatch {
            expected,
            got: xs.len(),
        })
    } else {
        Ok(())
    }
}

pub fn log_prior_hyper<M: Model + ?Sized>(model: &M, psi: &[f64]) -> Result<f64> {
    check_len(psi, model.dims().d_psi)?;
    check_finite_input(psi, "hyperparameter")?;
    check_output(model.log_prior_hyper(psi), "log_prior_hyper")
}

pub fn log_conditional_prior<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    psi: &[f64],
    j: usize,
) -> Result<f64> {
    if model.structure() != Structure::Iid {
        return Err(Error::Contract(
            "log_conditional_prior requires an iid-structured model".into(),
        ));
    }
    let dims = model.dims();
    if j >= dims.n_groups {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: dims.n_groups,
        });
    }
    check_len(theta, dims.d_theta)?;
    check_finite_input(theta, "local parameter")?;
    check_finite_input(psi, "hyperparameter")?;
    check_output(
        model.log_conditional_prior(theta, psi, j),
        "log_conditional_prior",
    )
}

/// Conditional prior of site `t` given its Markov blanket. `prev` and `next`
/// are `theta_{t-1}` and `theta_{t+1}` where they exist.
pub fn log_blanket_prior<M: Model + ?Sized>(
    model: &M,
    t: usize,
    prev: Option<&[f64]>,
    cur: &[f64],
    next: Option<&[f64]>,
    psi: &[f64],
) -> Result<f64> {
    if model.structure() != Structure::Markov {
        return Err(Error::Contract(
            "log_blanket_prior requires a Markov-structured model".into(),
        ));
    }
    let n = model.dims().n_groups;
    if t >= n {
        return Err(Error::IndexOutOfRange { index: t, len: n });
    }
    if (t > 0) != prev.is_some() || (t + 1 < n) != next.is_some() {
        return Err(Error::Contract(format!(
            "blanket window for site {t} of {n} has the wrong neighbours"
        )));
    }
    check_finite_input(cur, "local parameter")?;
    check_finite_input(psi, "hyperparameter")?;
    check_output(
        blanket_prior_raw(model, prev, cur, next, psi),
        "log_blanket_prior",
    )
}

pub fn group_loglike<M: Model + ?Sized>(
    model: &M,
    theta: &[f64],
    psi: &[f64],
    j: usize,
) -> Result<f64> {
    let n = model.dims().n_groups;
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, len: n });
    }
    check_finite_input(theta, "local parameter")?;
    check_finite_input(psi, "hyperparameter")?;
    check_output(model.group_loglike(theta, psi, j), "group_loglike")
}

/// Fresh recomputation of every group term: `(S, [ell_j])`. Performs exactly
/// `J` group calls.
pub fn total_loglike<M: Model + ?Sized>(model: &M, state: &ParamState) -> Result<(f64, Vec<f64>)> {
    let psi = state.psi();
    let mut ell = Vec::with_capacity(state.n_groups());
    for j in 0..state.n_groups() {
        ell.push(check_output(
            model.group_loglike(state.theta(j), psi, j),
            "group_loglike",
        )?);
    }
    Ok((ell.iter().sum(), ell))
}

/// Ancestral draw from the joint prior with populated caches.
pub fn sample_prior<M: Model + ?Sized>(model: &M, rng: &mut dyn RngCore) -> Result<ParamState> {
    let dims = model.dims();
    let mut values = vec![0.0; dims.d_total()];
    let (psi, thetas) = values.split_at_mut(dims.d_psi);
    model.sample_hyper(rng, psi);
    let markov = model.structure() == Structure::Markov;
    for j in 0..dims.n_groups {
        let (before, rest) = thetas.split_at_mut(j * dims.d_theta);
        let prev = if markov && j > 0 {
            Some(&before[(j - 1) * dims.d_theta..])
        } else {
            None
        };
        model.sample_local(j, prev, psi, rng, &mut rest[..dims.d_theta]);
    }
    ParamState::from_values(model, values)
}

/// `log π(theta_t | blanket, psi)` without validation.
#[inline]
pub(crate) fn blanket_prior_raw<M: Model + ?Sized>(
    model: &M,
    prev: Option<&[f64]>,
    cur: &[f64],
    next: Option<&[f64]>,
    psi: &[f64],
) -> f64 {
    let own = match prev {
        Some(p) => model.log_transition(p, cur, psi),
        None => model.log_initial(cur, psi),
    };
    match next {
        Some(n) => own + model.log_transition(cur, n, psi),
        None => own,
    }
}

/// `log π(theta_{1:J} | psi)` without validation.
pub(crate) fn local_log_prior<M: Model + ?Sized>(model: &M, psi: &[f64], thetas: &[f64]) -> f64 {
    let d = model.dims().d_theta;
    match model.structure() {
        Structure::Iid => thetas
            .chunks_exact(d)
            .enumerate()
            .map(|(j, th)| model.log_conditional_prior(th, psi, j))
            .sum(),
        Structure::Markov => {
            let mut total = model.log_initial(&thetas[..d], psi);
            for w in thetas.windows(2 * d).step_by(d) {
                total += model.log_transition(&w[..d], &w[d..], psi);
            }
            total
        }
    }
}

/// `log π(psi) + log π(theta | psi)` without validation.
pub(crate) fn joint_log_prior<M: Model + ?Sized>(model: &M, psi: &[f64], thetas: &[f64]) -> f64 {
    let hyper = model.log_prior_hyper(psi);
    if hyper == f64::NEG_INFINITY {
        return hyper;
    }
    hyper + local_log_prior(model, psi, thetas)
}

/// Wraps a model and counts every `group_loglike` call. Used to audit the
/// evaluation accounting of the kernels independently of their own counters.
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicU64,
}

impl<M: Model> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<M: Model> Model for CountingModel<M> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dims(&self) -> ModelDims {
        self.inner.dims()
    }
    fn structure(&self) -> Structure {
        self.inner.structure()
    }
    fn log_prior_hyper(&self, psi: &[f64]) -> f64 {
        self.inner.log_prior_hyper(psi)
    }
    fn log_conditional_prior(&self, theta: &[f64], psi: &[f64], j: usize) -> f64 {
        self.inner.log_conditional_prior(theta, psi, j)
    }
    fn log_initial(&self, theta0: &[f64], psi: &[f64]) -> f64 {
        self.inner.log_initial(theta0, psi)
    }
    fn log_transition(&self, prev: &[f64], cur: &[f64], psi: &[f64]) -> f64 {
        self.inner.log_transition(prev, cur, psi)
    }
    fn group_loglike(&self, theta: &[f64], psi: &[f64], j: usize) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.group_loglike(theta, psi, j)
    }
    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.inner.sample_hyper(rng, out)
    }
    fn sample_local(
        &self,
        j: usize,
        prev: Option<&[f64]>,
        psi: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) {
        self.inner.sample_local(j, prev, psi, rng, out)
    }
    fn loglike_depends_on_psi(&self) -> bool {
        self.inner.loglike_depends_on_psi()
    }
    fn force_full_recompute_on_psi(&self) -> bool {
        self.inner.force_full_recompute_on_psi()
    }
    fn analytic_logz(&self) -> Option<f64> {
        self.inner.analytic_logz()
    }
    fn analytic_information(&self) -> Option<AnalyticInformation> {
        self.inner.analytic_information()
    }
    fn dataset(&self) -> Option<Dataset> {
        self.inner.dataset()
    }
}

/// Synthetic observations in the columnar text format:
///
/// ```text
/// # model=<name> seed=<u64> J=<n>
/// <obs_0>
/// <obs_1>
/// ...
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub model: String,
    pub seed: u64,
    pub observations: Vec<f64>,
}

impl Dataset {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# model={} seed={} J={}",
            self.model,
            self.seed,
            self.observations.len()
        )?;
        for y in &self.observations {
            writeln!(w, "{y}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| bad("missing '#' header".into()))?;
        let (mut model, mut seed, mut n) = (None, None, None);
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("model", v)) => model = Some(v.to_string()),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                Some(("J", v)) => n = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unexpected header field '{field}'"))),
            }
        }
        let (model, seed, n) = match (model, seed, n) {
            (Some(m), Some(s), Some(n)) => (m, s, n),
            _ => return Err(bad("header needs model=, seed= and J=".into())),
        };
        let mut observations = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            observations.push(
                line.parse::<f64>()
                    .map_err(|e| bad(format!("bad observation '{line}': {e}")))?,
            );
        }
        if observations.len() != n {
            return Err(bad(format!(
                "header says J={n} but found {} observations",
                observations.len()
            )));
        }
        Ok(Self {
            model,
            seed,
            observations,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_total_and_validation() {
        let d = ModelDims::new(3, 50, 1).unwrap();
        assert_eq!(d.d_total(), 53);
        assert_eq!(ModelDims::new(0, 4, 2).unwrap().d_total(), 8);
        assert!(ModelDims::new(1, 0, 1).is_err());
        assert!(ModelDims::new(1, 3, 0).is_err());
    }

    #[test]
    fn dataset_round_trip() {
        let ds = Dataset {
            model: "hier_gauss".into(),
            seed: 17,
            observations: vec![0.25, -3.5, 1e-7],
        };
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# model=hier_gauss seed=17 J=3\n"));
        let back = Dataset::read_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn dataset_rejects_count_mismatch() {
        let text = "# model=x seed=1 J=2\n1.0\n";
        assert!(Dataset::read_from(text.as_bytes(), Path::new("mem")).is_err());
    }
}
