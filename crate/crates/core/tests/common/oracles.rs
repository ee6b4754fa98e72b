//! Long-run distribution checks of the replacement kernels against exact
//! targets. Shared by the integration tests and the acceptance harness.

use nalgebra::{DMatrix, DVector};
use nested_swig::benchmarks::{Funnel, FunnelConfig};
use nested_swig::kernel::{local_sweep, markov_local_sweep, nss_replace, psi_update, swig_replace};
use nested_swig::model::{sample_prior, Model, ParamState};
use nested_swig::slice::BlockCovariance;
use nested_swig::stats::{chi_squared_test, ks_test};
use nested_swig::{KernelConfig, KernelStats};

use super::{hg, normal_cdf, rng, DiskModel, FoldedAr};

/// One goodness-of-fit outcome.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub p_value: f64,
    /// Lag-one autocorrelation of the thinned draws (0 for independent replicas).
    pub lag1: f64,
    pub n: usize,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.p_value > 0.01 && self.lag1.abs() < 0.1
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: p = {:.4}, lag1 = {:.3}, n = {}", self.name, self.p_value, self.lag1, self.n)
    }
}

const THIN: usize = 10;

/// ψ-update at ℓ* = -∞ with θ held fixed against the conjugate N(ψ | θ).
pub fn psi_conditional(n_draws: usize, seed: u64) -> Check {
    let model = hg(10, seed);
    let dims = model.dims();
    let mut r = rng(seed);
    let mut state = sample_prior(&model, &mut r).unwrap();
    let (m, v) = model.conditional_psi(state.thetas());
    let cov = BlockCovariance::identity(dims);
    let cfg = KernelConfig::default();
    let mut stats = KernelStats::default();
    let mut xs = Vec::with_capacity(n_draws);
    for i in 0..n_draws * THIN {
        psi_update(&model, &mut state, f64::NEG_INFINITY, &cov, &cfg, &mut r, &mut stats).unwrap();
        if i % THIN == THIN - 1 {
            xs.push(state.psi()[0]);
        }
    }
    Check {
        name: "SwiG psi | theta vs conjugate conditional".into(),
        p_value: ks_test(&xs, |x| normal_cdf(x, m, v)).p_value,
        lag1: super::lag1(&xs),
        n: xs.len(),
    }
}

/// Local sweep at ℓ* = -∞ with ψ fixed against the conditional prior
/// N(ψ, σθ²), checked on two groups.
pub fn theta_conditional(n_draws: usize, seed: u64) -> Vec<Check> {
    let model = hg(10, seed);
    let dims = model.dims();
    let mut r = rng(seed);
    let mut values = sample_prior(&model, &mut r).unwrap().values().to_vec();
    values[0] = 2.0;
    let mut state = ParamState::from_values(&model, values).unwrap();
    let cov = BlockCovariance::identity(dims);
    let cfg = KernelConfig::default();
    let mut stats = KernelStats::default();
    let groups = [0usize, 7];
    let mut xs = vec![Vec::with_capacity(n_draws); groups.len()];
    for i in 0..n_draws * THIN {
        local_sweep(&model, &mut state, f64::NEG_INFINITY, &cov, &cfg, &mut r, &mut stats).unwrap();
        if i % THIN == THIN - 1 {
            for (x, &g) in xs.iter_mut().zip(&groups) {
                x.push(state.theta(g)[0]);
            }
        }
    }
    let var = model.config().sigma_theta.powi(2);
    groups
        .iter()
        .zip(&xs)
        .map(|(g, x)| Check {
            name: format!("SwiG theta_{g} | psi vs conditional prior"),
            p_value: ks_test(x, |t| normal_cdf(t, 2.0, var)).p_value,
            lag1: super::lag1(x),
            n: x.len(),
        })
        .collect()
}

/// Exact prior draws pushed through one replacement at ℓ* = -∞ must still
/// follow the joint prior: ψ ~ N(μ0, σψ²), θ_j ~ N(μ0, σψ² + σθ²).
/// Replicas are independent, so the draws are fully effective.
pub fn joint_prior(nss: bool, n_draws: usize, seed: u64) -> Vec<Check> {
    let model = hg(10, seed);
    let dims = model.dims();
    let c = model.config().clone();
    let cov = BlockCovariance::identity(dims);
    let cfg = KernelConfig { sweeps: 1, ..Default::default() };
    let mut stats = KernelStats::default();
    let mut r = rng(seed);
    let mut psi = Vec::with_capacity(n_draws);
    let mut th = Vec::with_capacity(n_draws);
    let mut moved = 0usize;
    for _ in 0..n_draws {
        let mut state = sample_prior(&model, &mut r).unwrap();
        let before = state.values().to_vec();
        if nss {
            nss_replace(&model, &mut state, f64::NEG_INFINITY, &cov, &cfg, &mut r, &mut stats).unwrap();
        } else {
            swig_replace(&model, &mut state, f64::NEG_INFINITY, &cov, &cfg, &mut r, &mut stats).unwrap();
        }
        moved += usize::from(state.values() != before.as_slice());
        psi.push(state.psi()[0]);
        th.push(state.theta(3)[0]);
    }
    assert!(moved as f64 > 0.99 * n_draws as f64, "kernel barely moves: {moved}/{n_draws}");
    let label = if nss { "NSS" } else { "SwiG" };
    let v_psi = c.sigma_psi.powi(2);
    vec![
        Check {
            name: format!("{label} joint prior psi marginal"),
            p_value: ks_test(&psi, |x| normal_cdf(x, c.mu0, v_psi)).p_value,
            lag1: 0.0,
            n: psi.len(),
        },
        Check {
            name: format!("{label} joint prior theta_3 marginal"),
            p_value: ks_test(&th, |x| normal_cdf(x, c.mu0, v_psi + c.sigma_theta.powi(2))).p_value,
            lag1: 0.0,
            n: th.len(),
        },
    ]
}

/// Constrained two-group disk: θ_1 histogram (20 bins) against the
/// quadrature marginal of the prior truncated to `S > ℓ*`, with ℓ* at the
/// prior median of `S`.
pub fn disk(nss: bool, n_draws: usize, seed: u64) -> Check {
    let model = DiskModel::default();
    let dims = model.dims();
    let r2 = model.median_r2();
    let lstar = -0.5 * r2;
    let rad = r2.sqrt();
    let (lo, hi) = (model.y[0] - rad, model.y[0] + rad);
    let bins = 20;
    let width = (hi - lo) / bins as f64;
    let expected: Vec<f64> = (0..bins)
        .map(|b| {
            let a = lo + b as f64 * width;
            nested_swig::quad::integrate(|t| model.theta1_density(t, r2), a, a + width, 1e-13, 1e-12)
                .unwrap()
                .value
        })
        .collect();

    let mut r = rng(seed);
    let mut state = loop {
        let s = sample_prior(&model, &mut r).unwrap();
        if s.loglike() > lstar {
            break s;
        }
    };
    let cov = BlockCovariance::identity(dims);
    let cfg = KernelConfig { sweeps: 1, ..Default::default() };
    let mut stats = KernelStats::default();
    let mut xs = Vec::with_capacity(n_draws);
    let mut counts = vec![0u64; bins];
    for i in 0..n_draws * THIN {
        if nss {
            nss_replace(&model, &mut state, lstar, &cov, &cfg, &mut r, &mut stats).unwrap();
        } else {
            swig_replace(&model, &mut state, lstar, &cov, &cfg, &mut r, &mut stats).unwrap();
        }
        assert!(state.loglike() > lstar);
        if i % THIN == THIN - 1 {
            let t = state.theta(0)[0];
            xs.push(t);
            counts[(((t - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let (_, p) = chi_squared_test(&counts, &expected);
    Check {
        name: format!("{} constrained disk theta_1 histogram", if nss { "NSS" } else { "SwiG" }),
        p_value: p,
        lag1: super::lag1(&xs),
        n: xs.len(),
    }
}

/// Exact Gaussian smoothing marginals of the folded AR chain.
pub fn folded_ar_marginals(model: &FoldedAr) -> Vec<(f64, f64)> {
    let a = &model.0;
    let n = a.y.len();
    let s2 = a.sigma * a.sigma;
    let o2 = a.obs_sd * a.obs_sd;
    let mut q = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for t in 0..n {
        // Own transition (or stationary initial) plus the next transition.
        q[(t, t)] = if t == 0 { (1.0 - a.beta * a.beta) / s2 } else { 1.0 / s2 };
        if t + 1 < n {
            q[(t, t)] += a.beta * a.beta / s2;
            q[(t, t + 1)] = -a.beta / s2;
            q[(t + 1, t)] = -a.beta / s2;
        }
        q[(t, t)] += 1.0 / o2;
        b[t] = (a.y[t] - a.mu) / o2;
    }
    let cov = q.try_inverse().unwrap();
    let mean = &cov * b;
    (0..n).map(|t| (a.mu + mean[t], cov[(t, t)])).collect()
}

/// Markov sweep at ℓ* = -∞ on the folded AR chain against its exact
/// smoothing marginals, one check per site.
pub fn markov_sites(n_sites: usize, n_draws: usize, seed: u64) -> Vec<Check> {
    let model = FoldedAr::new(n_sites);
    let dims = model.dims();
    let truth = folded_ar_marginals(&model);
    let mut r = rng(seed);
    let mut state = sample_prior(&model, &mut r).unwrap();
    let cov = BlockCovariance::identity(dims);
    let cfg = KernelConfig::default();
    let mut stats = KernelStats::default();
    let mut xs = vec![Vec::with_capacity(n_draws); n_sites];
    for i in 0..n_draws * THIN {
        markov_local_sweep(&model, &mut state, f64::NEG_INFINITY, &cov, &cfg, &mut r, &mut stats).unwrap();
        if i % THIN == THIN - 1 {
            for (t, x) in xs.iter_mut().enumerate() {
                x.push(state.theta(t)[0]);
            }
        }
    }
    xs.iter()
        .zip(&truth)
        .enumerate()
        .map(|(t, (x, &(m, v)))| Check {
            name: format!("Markov site {t} vs smoothing marginal"),
            p_value: ks_test(x, |z| normal_cdf(z, m, v)).p_value,
            lag1: super::lag1(x),
            n: x.len(),
        })
        .collect()
}

/// ψ-dependent likelihood: exact funnel prior draws through one SwiG
/// replacement at ℓ* = -∞ keep ψ ~ N(0, σψ²) and θ_0 ~ U(-b, b).
pub fn funnel_prior(n_draws: usize, seed: u64) -> Vec<Check> {
    let cfgm = FunnelConfig::default();
    let model = Funnel::new(cfgm.clone()).unwrap();
    let cov = BlockCovariance::identity(model.dims());
    let cfg = KernelConfig { sweeps: 1, ..Default::default() };
    let mut stats = KernelStats::default();
    let mut r = rng(seed);
    let (mut psi, mut th) = (Vec::new(), Vec::new());
    for _ in 0..n_draws {
        let mut s = sample_prior(&model, &mut r).unwrap();
        swig_replace(&model, &mut s, f64::NEG_INFINITY, &cov, &cfg, &mut r, &mut stats).unwrap();
        psi.push(s.psi()[0]);
        th.push(s.theta(0)[0]);
    }
    let b = cfgm.theta_bound;
    vec![
        Check {
            name: "SwiG funnel prior psi marginal".into(),
            p_value: ks_test(&psi, |x| normal_cdf(x, 0.0, cfgm.sigma_psi_sq)).p_value,
            lag1: 0.0,
            n: psi.len(),
        },
        Check {
            name: "SwiG funnel prior theta_0 marginal".into(),
            p_value: ks_test(&th, |x| ((x + b) / (2.0 * b)).clamp(0.0, 1.0)).p_value,
            lag1: 0.0,
            n: th.len(),
        },
    ]
}
