#![allow(dead_code)]

pub mod invariants;
pub mod oracles;

use nested_swig::benchmarks::{ArGauss, HierGauss, HierGaussConfig};
use nested_swig::model::{Model, ModelDims, Structure};
use nested_swig::quad;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    Normal::new(mean, var.sqrt()).unwrap().cdf(x)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    normal_cdf(x, 0.0, 1.0)
}

pub fn hg(n_groups: usize, seed: u64) -> HierGauss {
    HierGauss::new(HierGaussConfig {
        n_groups,
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// Two standard-normal groups, `ℓ_j = -(θ_j - y_j)²/2`, no hyperparameters.
/// `S > ℓ*` is the disk of radius `sqrt(-2ℓ*)` around `y`.
#[derive(Clone, Debug)]
pub struct DiskModel {
    pub y: [f64; 2],
}

impl Default for DiskModel {
    fn default() -> Self {
        Self { y: [0.5, -0.3] }
    }
}

impl Model for DiskModel {
    fn name(&self) -> &str {
        "disk"
    }
    fn dims(&self) -> ModelDims {
        ModelDims::new(0, 2, 1).unwrap()
    }
    fn structure(&self) -> Structure {
        Structure::Iid
    }
    fn log_prior_hyper(&self, _psi: &[f64]) -> f64 {
        0.0
    }
    fn log_conditional_prior(&self, theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        -0.5 * theta[0] * theta[0]
    }
    fn group_loglike(&self, theta: &[f64], _psi: &[f64], j: usize) -> f64 {
        -0.5 * (theta[0] - self.y[j]).powi(2)
    }
    fn sample_hyper(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) {}
    fn sample_local(&self, _j: usize, _prev: Option<&[f64]>, _psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = StandardNormal.sample(rng);
    }
    fn loglike_depends_on_psi(&self) -> bool {
        false
    }
}

impl DiskModel {
    /// Unnormalised marginal density of θ_1 on the disk of squared radius
    /// `r2`: `φ(θ_1)·[Φ(y_2 + w) - Φ(y_2 - w)]`.
    pub fn theta1_density(&self, t: f64, r2: f64) -> f64 {
        let h = r2 - (t - self.y[0]).powi(2);
        if h <= 0.0 {
            return 0.0;
        }
        let w = h.sqrt();
        let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        phi * (std_normal_cdf(self.y[1] + w) - std_normal_cdf(self.y[1] - w))
    }

    /// Prior mass inside the disk.
    pub fn disk_mass(&self, r2: f64) -> f64 {
        let r = r2.sqrt();
        quad::integrate(|t| self.theta1_density(t, r2), self.y[0] - r, self.y[0] + r, 1e-12, 1e-12)
            .unwrap()
            .value
    }

    /// Squared radius enclosing half the prior mass.
    pub fn median_r2(&self) -> f64 {
        let (mut lo, mut hi) = (1e-6, 50.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.disk_mass(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// A Markov wrapper around an iid model whose conditional prior does not
/// depend on the group index: `π(θ_t | θ_{t-1}, ψ) := π(θ_t | ψ)`.
pub struct IidAsMarkov<M>(pub M);

impl<M: Model> Model for IidAsMarkov<M> {
    fn name(&self) -> &str {
        "iid_as_markov"
    }
    fn dims(&self) -> ModelDims {
        self.0.dims()
    }
    fn structure(&self) -> Structure {
        Structure::Markov
    }
    fn log_prior_hyper(&self, psi: &[f64]) -> f64 {
        self.0.log_prior_hyper(psi)
    }
    fn log_initial(&self, theta0: &[f64], psi: &[f64]) -> f64 {
        self.0.log_conditional_prior(theta0, psi, 0)
    }
    fn log_transition(&self, _prev: &[f64], cur: &[f64], psi: &[f64]) -> f64 {
        self.0.log_conditional_prior(cur, psi, 0)
    }
    fn group_loglike(&self, theta: &[f64], psi: &[f64], j: usize) -> f64 {
        self.0.group_loglike(theta, psi, j)
    }
    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        self.0.sample_hyper(rng, out)
    }
    fn sample_local(&self, j: usize, _prev: Option<&[f64]>, psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.0.sample_local(j, None, psi, rng, out)
    }
    fn loglike_depends_on_psi(&self) -> bool {
        self.0.loglike_depends_on_psi()
    }
    fn force_full_recompute_on_psi(&self) -> bool {
        self.0.force_full_recompute_on_psi()
    }
}

/// Gaussian AR(1) whose observation terms are folded into the chain prior
/// (every observation equals `ArGauss::y[0]`), with `ℓ ≡ 0`. At ℓ* = -∞
/// the Markov sweep then targets the smoothing posterior, whose site
/// conditionals are [`ArGauss::full_conditional`].
pub struct FoldedAr(pub ArGauss);

impl FoldedAr {
    pub fn new(n: usize) -> Self {
        Self(ArGauss {
            mu: 0.5,
            beta: 0.8,
            sigma: 0.6,
            obs_sd: 0.7,
            y: vec![1.3; n],
        })
    }
    fn obs(&self, x: f64) -> f64 {
        let a = &self.0;
        -0.5 * ((x - a.y[0]) / a.obs_sd).powi(2)
    }
}

impl Model for FoldedAr {
    fn name(&self) -> &str {
        "folded_ar"
    }
    fn dims(&self) -> ModelDims {
        ModelDims::new(0, self.0.y.len(), 1).unwrap()
    }
    fn structure(&self) -> Structure {
        Structure::Markov
    }
    fn log_prior_hyper(&self, _psi: &[f64]) -> f64 {
        0.0
    }
    fn log_initial(&self, theta0: &[f64], _psi: &[f64]) -> f64 {
        let a = &self.0;
        let v0 = a.sigma * a.sigma / (1.0 - a.beta * a.beta);
        -0.5 * (theta0[0] - a.mu).powi(2) / v0 + self.obs(theta0[0])
    }
    fn log_transition(&self, prev: &[f64], cur: &[f64], _psi: &[f64]) -> f64 {
        let a = &self.0;
        let m = a.mu + a.beta * (prev[0] - a.mu);
        -0.5 * ((cur[0] - m) / a.sigma).powi(2) + self.obs(cur[0])
    }
    fn group_loglike(&self, _theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        0.0
    }
    fn sample_hyper(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) {}
    fn sample_local(&self, _j: usize, prev: Option<&[f64]>, _psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let a = &self.0;
        let z: f64 = StandardNormal.sample(rng);
        out[0] = match prev {
            Some(p) => a.mu + a.beta * (p[0] - a.mu) + a.sigma * z,
            None => a.mu + a.sigma / (1.0 - a.beta * a.beta).sqrt() * z,
        };
    }
    fn loglike_depends_on_psi(&self) -> bool {
        false
    }
}

/// Lag-one autocorrelation; small values mean thinned draws are
/// effectively independent.
pub fn lag1(xs: &[f64]) -> f64 {
    nested_swig::stats::lag1_autocorrelation(xs)
}

/// Every prior and likelihood term of a Markov model at `values`: the
/// initial density, the `J - 1` transitions, then the `J` group terms.
pub fn markov_terms<M: Model + ?Sized>(model: &M, values: &[f64]) -> Vec<f64> {
    let dims = model.dims();
    let (psi, th) = values.split_at(dims.d_psi);
    let d = dims.d_theta;
    let site = |t: usize| &th[t * d..(t + 1) * d];
    let mut out = vec![model.log_initial(site(0), psi)];
    for t in 1..dims.n_groups {
        out.push(model.log_transition(site(t - 1), site(t), psi));
    }
    out.extend((0..dims.n_groups).map(|t| model.group_loglike(site(t), psi, t)));
    out
}

/// Perturbs each site in turn and returns the first term that changed
/// outside the site's blanket (or failed to change inside it), if any.
/// Prior term `i` links sites `i - 1` and `i`; group term `J + t` touches
/// site `t` only.
pub fn blanket_violation<M: Model + ?Sized>(model: &M, values: &[f64]) -> Option<String> {
    let dims = model.dims();
    let n = dims.n_groups;
    let base = markov_terms(model, values);
    for site in 0..n {
        let mut v = values.to_vec();
        v[dims.d_psi + site * dims.d_theta] += 0.37;
        let moved = markov_terms(model, &v);
        for (idx, (x, y)) in base.iter().zip(&moved).enumerate() {
            let touches = if idx < n { idx == site || idx == site + 1 } else { idx - n == site };
            if touches && x == y {
                return Some(format!("term {idx} did not move with site {site}"));
            }
            if !touches && x.to_bits() != y.to_bits() {
                return Some(format!("term {idx} moved with site {site}"));
            }
        }
    }
    None
}
