//! Batch-deletion nested sampling.
//!
//! Each iteration deletes the `k` lowest-likelihood live points (plus any
//! points tied with the `k`-th), assigns them prior volumes as if they had
//! been removed one at a time, resamples as many
//! parents uniformly from the survivors and mutates each with the configured
//! kernel under the new threshold. Mutations within an iteration run in
//! parallel on independent counter-based random streams, so results do not
//! depend on the thread count.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{nss_replace, swig_replace, KernelConfig, KernelStats};
use crate::model::{sample_prior, AnalyticInformation, Model, ModelDims, ParamState};
use crate::slice::{estimate_block_cov, BlockCovariance};
use crate::stats::{ess_from_log_weights, log_add_exp, log_sub_exp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Swig,
    Nss,
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swig" => Ok(Self::Swig),
            "nss" => Ok(Self::Nss),
            _ => Err(Error::Config(format!("unknown kernel '{s}' (expected swig or nss)"))),
        }
    }
}

impl std::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Swig => "swig",
            Self::Nss => "nss",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Live points.
    pub m: usize,
    /// Points deleted per iteration.
    pub k: usize,
    /// Stop once `log Z_live − log Z` falls below this.
    pub epsilon: f64,
    pub kernel: KernelKind,
    pub seed: u64,
    /// Store the parameter vector of every n-th dead point (0 stores none).
    pub store_params_every: usize,
    /// Share one local covariance block across groups. `None` pools when
    /// `d_theta <= 2`.
    pub pool_local_cov: Option<bool>,
    pub max_iterations: usize,
    #[serde(skip)]
    pub kernel_cfg: KernelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 1000,
            k: 50,
            epsilon: -3.0,
            kernel: KernelKind::Swig,
            seed: 0,
            store_params_every: 1,
            pool_local_cov: None,
            max_iterations: 1_000_000,
            kernel_cfg: KernelConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self, dims: ModelDims) -> Result<()> {
        if self.m < 2 {
            return Err(Error::Config("run.m must be at least 2".into()));
        }
        if self.k == 0 || self.k >= self.m {
            return Err(Error::Config(format!(
                "run.k must satisfy 1 <= k < m (k={}, m={})",
                self.k, self.m
            )));
        }
        if !(self.epsilon < 0.0) {
            return Err(Error::Config("run.epsilon must be negative".into()));
        }
        self.kernel_cfg.validate(dims)
    }

    pub fn pool_for(&self, dims: ModelDims) -> bool {
        self.pool_local_cov.unwrap_or(dims.d_theta <= 2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeadRecord {
    pub iteration: u64,
    pub log_like: f64,
    pub log_x: f64,
    /// Normalised posterior log-weight once the run is finalised; the raw
    /// quadrature log-weight `log ΔX + ℓ` before that.
    pub log_weight: f64,
    pub params: Option<Vec<f64>>,
}

/// Running evidence, prior volume and information.
#[derive(Clone, Debug)]
pub struct EvidenceAccumulator {
    pub log_z: f64,
    pub log_x: f64,
    pub h: f64,
    pub dead: Vec<DeadRecord>,
}

impl Default for EvidenceAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl EvidenceAccumulator {
    pub fn new() -> Self {
        Self {
            log_z: f64::NEG_INFINITY,
            log_x: 0.0,
            h: 0.0,
            dead: Vec::new(),
        }
    }

    /// Adds one dead point carrying prior mass `exp(log_width)`.
    pub fn push(
        &mut self,
        iteration: u64,
        log_like: f64,
        log_x: f64,
        log_width: f64,
        params: Option<Vec<f64>>,
    ) {
        let log_w = if log_like == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            log_width + log_like
        };
        let z_old = self.log_z;
        let z_new = log_add_exp(z_old, log_w);
        if z_new > f64::NEG_INFINITY {
            let mut h = -z_new;
            if log_w > f64::NEG_INFINITY {
                h += (log_w - z_new).exp() * log_like;
            }
            if z_old > f64::NEG_INFINITY {
                h += (z_old - z_new).exp() * (self.h + z_old);
            }
            self.h = h;
        }
        self.log_z = z_new;
        self.dead.push(DeadRecord {
            iteration,
            log_like,
            log_x,
            log_weight: log_w,
            params,
        });
    }

    /// Adds a deletion batch, sorted ascending in `ℓ`, with volumes from
    /// [`compress_volume`]. Advances `log_x` to the last assignment.
    pub fn update(&mut self, iteration: u64, batch: Vec<(f64, Option<Vec<f64>>)>, log_xs: &[f64]) {
        debug_assert_eq!(batch.len(), log_xs.len());
        let mut prev = self.log_x;
        for ((ell, params), &lx) in batch.into_iter().zip(log_xs) {
            self.push(iteration, ell, lx, log_sub_exp(prev, lx), params);
            prev = lx;
        }
        self.log_x = prev;
    }
}

/// Indices of the `k` lowest log-likelihoods in ascending order (ties by
/// index) and the threshold `ℓ*`, the `k`-th lowest value.
pub fn select_batch(ell: &[f64], k: usize) -> (Vec<usize>, f64) {
    assert!(k >= 1 && k < ell.len(), "select_batch needs 1 <= k < m");
    let mut idx: Vec<usize> = (0..ell.len()).collect();
    idx.sort_by(|&a, &b| ell[a].total_cmp(&ell[b]).then(a.cmp(&b)));
    idx.truncate(k);
    let lstar = ell[idx[k - 1]];
    (idx, lstar)
}

/// Appends to `batch` every other live point tied with `ℓ*`, provided at
/// least one live point stays strictly above it.
///
/// On a likelihood plateau the tied points are exchangeable: deleting only
/// some of them and replacing those above `ℓ*` leaves the rest to be counted
/// again by later batches, which over-compresses the volume. Deleting the
/// whole plateau at once keeps the sequential-deletion rule exact. When the
/// entire live set is tied nothing is added.
pub fn extend_ties(ell: &[f64], batch: &mut Vec<usize>, lstar: f64) {
    let mut dead = vec![false; ell.len()];
    for &i in batch.iter() {
        dead[i] = true;
    }
    let tied: Vec<usize> = (0..ell.len()).filter(|&i| !dead[i] && ell[i] == lstar).collect();
    let above = ell.iter().filter(|&&l| l > lstar).count();
    if !tied.is_empty() && above > 0 {
        batch.extend(tied);
    }
}

/// Volumes for a batch of `k` deletions from `m` live points, treated as
/// sequential single deletions: `log_x_i = log_x − Σ_{r=0}^{i} 1/(m−r)`.
/// Returns the per-point assignments and the new `log_x`.
pub fn compress_volume(log_x: f64, m: usize, k: usize) -> (Vec<f64>, f64) {
    let mut out = Vec::with_capacity(k);
    let mut lx = log_x;
    for r in 0..k {
        lx -= 1.0 / (m - r) as f64;
        out.push(lx);
    }
    (out, lx)
}

/// `log X + max ℓ_live − log Z < ε`.
pub fn termination_check(acc: &EvidenceAccumulator, max_live_ell: f64, epsilon: f64) -> bool {
    if acc.log_z == f64::NEG_INFINITY {
        return false;
    }
    acc.log_x + max_live_ell - acc.log_z < epsilon
}

pub struct LiveSet {
    pub particles: Vec<ParamState>,
    pub cov: BlockCovariance,
}

/// Counter-based stream: one independent generator per (iteration, slot, tag).
pub fn stream(seed: u64, iteration: u64, slot: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, w) in [seed, iteration, slot, tag].into_iter().enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

const TAG_INIT: u64 = 0;
const TAG_PARENTS: u64 = 1;
const TAG_MUTATE: u64 = 2;

#[derive(Clone, Debug)]
pub struct RunResult {
    pub model: String,
    pub dims: ModelDims,
    pub log_z: f64,
    pub sigma_hat: f64,
    pub h: f64,
    pub ess: f64,
    pub n_iterations: u64,
    /// Group calls including the `m·J` made to initialise the live set.
    pub n_group_calls: u64,
    pub converged: bool,
    pub stats: KernelStats,
    pub analytic_logz: Option<f64>,
    pub config: RunConfig,
    pub dead: Vec<DeadRecord>,
    pub wall_seconds: f64,
}

impl RunResult {
    pub fn full_likelihood_equivalents(&self) -> f64 {
        self.n_group_calls as f64 / self.dims.n_groups as f64
    }

    /// Normalised posterior weights of the dead points.
    pub fn weights(&self) -> Vec<f64> {
        self.dead.iter().map(|d| d.log_weight.exp()).collect()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            model: self.model.clone(),
            seed: self.config.seed,
            kernel: self.config.kernel,
            log_z: self.log_z,
            sigma_hat: self.sigma_hat,
            h: self.h,
            ess: self.ess,
            n_iterations: self.n_iterations,
            n_dead: self.dead.len() as u64,
            n_group_calls: self.n_group_calls,
            n_full_likelihood_equivalents: self.full_likelihood_equivalents(),
            stall_count: self.stats.stalls,
            converged: self.converged,
            analytic_logz: self.analytic_logz,
            n_groups: self.dims.n_groups,
            d_total: self.dims.d_total(),
            stats: self.stats,
            run: self.config.clone(),
            kernel_config: self.config.kernel_cfg,
        }
    }
}

/// The structured per-run summary. Wall time is kept out of it so that
/// repeated runs produce byte-identical summaries; see [`Timing`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub seed: u64,
    pub kernel: KernelKind,
    pub log_z: f64,
    pub sigma_hat: f64,
    pub h: f64,
    pub ess: f64,
    pub n_iterations: u64,
    pub n_dead: u64,
    pub n_group_calls: u64,
    pub n_full_likelihood_equivalents: f64,
    pub stall_count: u64,
    pub converged: bool,
    pub analytic_logz: Option<f64>,
    pub n_groups: usize,
    pub d_total: usize,
    pub stats: KernelStats,
    pub run: RunConfig,
    pub kernel_config: KernelConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

fn mutate<M: Model + ?Sized>(
    model: &M,
    parent: &ParamState,
    lstar: f64,
    cov: &BlockCovariance,
    cfg: &RunConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(ParamState, KernelStats)> {
    let mut state = parent.clone();
    let mut stats = KernelStats::default();
    match cfg.kernel {
        KernelKind::Swig => swig_replace(model, &mut state, lstar, cov, &cfg.kernel_cfg, rng, &mut stats)?,
        KernelKind::Nss => nss_replace(model, &mut state, lstar, cov, &cfg.kernel_cfg, rng, &mut stats)?,
    }
    Ok((state, stats))
}

fn estimate_cov(particles: &[&ParamState], dims: ModelDims, pool: bool) -> Result<BlockCovariance> {
    let pts: Vec<&[f64]> = particles.iter().map(|p| p.values()).collect();
    estimate_block_cov(&pts, dims, pool)
}

/// Runs nested sampling to termination and finalises the evidence.
pub fn run_nested_sampling<M: Model + ?Sized>(model: &M, cfg: &RunConfig) -> Result<RunResult> {
    let start = Instant::now();
    let dims = model.dims();
    cfg.validate(dims)?;
    let (m, k) = (cfg.m, cfg.k);
    let pool = cfg.pool_for(dims);
    let stride = cfg.store_params_every;
    let keep = |n: usize| stride > 0 && n % stride == 0;

    let particles: Vec<ParamState> = (0..m)
        .into_par_iter()
        .map(|i| sample_prior(model, &mut stream(cfg.seed, u64::MAX, i as u64, TAG_INIT)))
        .collect::<Result<_>>()?;
    let mut stats = KernelStats::default();
    let init_calls = (m * dims.n_groups) as u64;
    let all: Vec<&ParamState> = particles.iter().collect();
    let cov = estimate_cov(&all, dims, pool)?;
    let mut live = LiveSet { particles, cov };
    let mut acc = EvidenceAccumulator::new();
    let mut iteration = 0u64;
    let mut converged = false;

    while (iteration as usize) < cfg.max_iterations {
        let ell: Vec<f64> = live.particles.iter().map(|p| p.loglike()).collect();
        if let Some(i) = ell.iter().position(|v| v.is_nan()) {
            return Err(Error::nan(format!("live point {i} log-likelihood")));
        }
        let (mut dead_idx, lstar) = select_batch(&ell, k);
        extend_ties(&ell, &mut dead_idx, lstar);
        let n_dead = dead_idx.len();
        let (log_xs, _) = compress_volume(acc.log_x, m, n_dead);
        let base = acc.dead.len();
        let batch: Vec<(f64, Option<Vec<f64>>)> = dead_idx
            .iter()
            .enumerate()
            .map(|(i, &j)| (ell[j], keep(base + i).then(|| live.particles[j].values().to_vec())))
            .collect();
        acc.update(iteration, batch, &log_xs);

        let mut is_dead = vec![false; m];
        for &j in &dead_idx {
            is_dead[j] = true;
        }
        let survivors: Vec<usize> = (0..m).filter(|&j| !is_dead[j]).collect();
        let surv_refs: Vec<&ParamState> = survivors.iter().map(|&j| &live.particles[j]).collect();
        live.cov = estimate_cov(&surv_refs, dims, pool)?;
        let mut prng = stream(cfg.seed, iteration, 0, TAG_PARENTS);
        let parents: Vec<usize> = (0..n_dead)
            .map(|_| survivors[prng.random_range(0..survivors.len())])
            .collect();

        let results: Vec<(ParamState, KernelStats)> = parents
            .par_iter()
            .enumerate()
            .map(|(slot, &p)| {
                let mut rng = stream(cfg.seed, iteration, slot as u64, TAG_MUTATE);
                mutate(model, &live.particles[p], lstar, &live.cov, cfg, &mut rng)
            })
            .collect::<Result<_>>()?;
        for (&j, (state, st)) in dead_idx.iter().zip(results) {
            stats.merge(&st);
            live.particles[j] = state;
        }
        iteration += 1;

        let max_live = live
            .particles
            .iter()
            .map(|p| p.loglike())
            .fold(f64::NEG_INFINITY, f64::max);
        if termination_check(&acc, max_live, cfg.epsilon) {
            converged = true;
            break;
        }
    }

    let final_iter = iteration;
    finalize(
        model,
        &mut acc,
        live,
        final_iter,
        &keep,
        RunTail {
            stats,
            init_calls,
            converged,
            cfg: cfg.clone(),
            start,
        },
    )
}

struct RunTail {
    stats: KernelStats,
    init_calls: u64,
    converged: bool,
    cfg: RunConfig,
    start: Instant,
}

/// Appends the live points as dead records of equal width `X_t / m`,
/// normalises weights and computes `σ̂ = √(H/m)` and the ESS.
fn finalize<M: Model + ?Sized>(
    model: &M,
    acc: &mut EvidenceAccumulator,
    live: LiveSet,
    iteration: u64,
    keep: &dyn Fn(usize) -> bool,
    tail: RunTail,
) -> Result<RunResult> {
    let m = live.particles.len();
    let mut rest = live.particles;
    rest.sort_by(|a, b| a.loglike().total_cmp(&b.loglike()));
    let log_xt = acc.log_x;
    let log_width = log_xt - (m as f64).ln();
    for (i, p) in rest.iter().enumerate() {
        let lx = log_xt + (((m - 1 - i) as f64) / m as f64).ln();
        let params = keep(acc.dead.len()).then(|| p.values().to_vec());
        acc.push(iteration, p.loglike(), lx, log_width, params);
    }
    if acc.log_z.is_nan() || acc.h.is_nan() {
        return Err(Error::nan("evidence accumulator"));
    }
    let log_z = acc.log_z;
    for d in &mut acc.dead {
        d.log_weight -= log_z;
    }
    let lw: Vec<f64> = acc.dead.iter().map(|d| d.log_weight).collect();
    let ess = ess_from_log_weights(&lw);
    let dims = model.dims();
    let cfg = tail.cfg;
    Ok(RunResult {
        model: model.name().to_string(),
        dims,
        log_z,
        sigma_hat: (acc.h.max(0.0) / cfg.m as f64).sqrt(),
        h: acc.h,
        ess,
        n_iterations: iteration,
        n_group_calls: tail.init_calls + tail.stats.group_calls,
        converged: tail.converged,
        stats: tail.stats,
        analytic_logz: model.analytic_logz(),
        config: cfg,
        dead: std::mem::take(&mut acc.dead),
        wall_seconds: tail.start.elapsed().as_secs_f64(),
    })
}

/// Accumulated information against its analytic decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct InfoReport {
    pub h_total: f64,
    pub analytic: Option<AnalyticInformation>,
    pub analytic_total: Option<f64>,
    pub relative_error: Option<f64>,
    /// Whether the run's `H` is within 20% of the analytic sum.
    pub within_tolerance: Option<bool>,
}

pub fn info_decomposition_report<M: Model + ?Sized>(model: &M, run: &RunResult) -> InfoReport {
    let analytic = model.analytic_information();
    let analytic_total = analytic.as_ref().map(AnalyticInformation::total);
    let relative_error = analytic_total.map(|a| (run.h - a).abs() / a.abs());
    InfoReport {
        h_total: run.h,
        analytic,
        analytic_total,
        relative_error,
        within_tolerance: relative_error.map(|e| e <= 0.2),
    }
}

/// Column names of the dead-point file for `dims`.
pub fn dead_columns(dims: ModelDims) -> Vec<String> {
    let mut cols: Vec<String> = ["iteration", "log_like", "log_x", "log_weight"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend((0..dims.d_psi).map(|i| format!("psi_{i}")));
    for j in 0..dims.n_groups {
        if dims.d_theta == 1 {
            cols.push(format!("theta_{j}"));
        } else {
            cols.extend((0..dims.d_theta).map(|i| format!("theta_{j}_{i}")));
        }
    }
    cols
}

pub fn write_dead_points<W: Write>(run: &RunResult, mut w: W) -> Result<()> {
    let cols = dead_columns(run.dims);
    writeln!(w, "# {}", cols.join(" "))?;
    let n_params = run.dims.d_total();
    let mut line = String::new();
    for d in &run.dead {
        line.clear();
        let _ = write!(line, "{} {} {} {}", d.iteration, d.log_like, d.log_x, d.log_weight);
        match &d.params {
            Some(p) => {
                for v in p {
                    let _ = write!(line, " {v}");
                }
            }
            None => {
                for _ in 0..n_params {
                    line.push_str(" nan");
                }
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes `dead.txt`, `summary.json` and `timing.json` into `dir`.
pub fn write_run_outputs(run: &RunResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("dead.txt"))?);
    write_dead_points(run, &mut w)?;
    w.flush()?;
    let mut s = serde_json::to_string_pretty(&run.summary())?;
    s.push('\n');
    std::fs::write(dir.join("summary.json"), s)?;
    let mut t = serde_json::to_string_pretty(&Timing {
        wall_seconds: run.wall_seconds,
    })?;
    t.push('\n');
    std::fs::write(dir.join("timing.json"), t)?;
    Ok(())
}

/// A parsed columnar text file with a `#` header naming the columns.
#[derive(Clone, Debug)]
pub struct ColumnFile {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ColumnFile {
    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let r = BufReader::new(File::open(path)?);
        let mut columns = Vec::new();
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(h) = t.strip_prefix('#') {
                if columns.is_empty() && rows.is_empty() {
                    columns = h.split_whitespace().map(str::to_string).collect();
                }
                continue;
            }
            let row: Vec<f64> = t
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("bad value '{v}': {e}"))))
                .collect::<Result<_>>()?;
            if let Some(first) = rows.first().map(Vec::len) {
                if row.len() != first {
                    return Err(bad(format!("ragged row with {} columns, expected {first}", row.len())));
                }
            }
            rows.push(row);
        }
        if !columns.is_empty() && rows.first().is_some_and(|r| r.len() != columns.len()) {
            return Err(bad("header and row widths differ".into()));
        }
        Ok(Self { columns, rows })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}
