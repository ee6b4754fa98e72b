//! Plugging in a model: Poisson counts per group with log-rates drawn from
//! a normal population whose mean and log-scale are the hyperparameters.
//! Only the per-group likelihood, the priors and their samplers are needed.
//!
//! `cargo run --release --example custom_model`

use nested_swig::model::{Model, ModelDims, Structure};
use nested_swig::{run_nested_sampling, KernelKind, RunConfig};
use rand::RngCore;
use rand_distr::{Distribution, Normal, StandardNormal};

struct PoissonGroups {
    counts: Vec<Vec<u32>>,
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

impl Model for PoissonGroups {
    fn name(&self) -> &str {
        "poisson_groups"
    }
    fn dims(&self) -> ModelDims {
        ModelDims::new(2, self.counts.len(), 1).expect("non-empty")
    }
    fn structure(&self) -> Structure {
        Structure::Iid
    }
    // mu ~ N(0, 2²), log tau ~ N(-1, 1).
    fn log_prior_hyper(&self, psi: &[f64]) -> f64 {
        let a = psi[0] / 2.0;
        let b = psi[1] + 1.0;
        -LN_2PI - 2f64.ln() - 0.5 * (a * a + b * b)
    }
    fn log_conditional_prior(&self, theta: &[f64], psi: &[f64], _j: usize) -> f64 {
        let tau = psi[1].exp();
        let r = (theta[0] - psi[0]) / tau;
        -0.5 * (LN_2PI + r * r) - psi[1]
    }
    fn group_loglike(&self, theta: &[f64], _psi: &[f64], j: usize) -> f64 {
        let rate = theta[0].exp();
        self.counts[j]
            .iter()
            .map(|&n| n as f64 * theta[0] - rate - ln_factorial(n))
            .sum()
    }
    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = Normal::new(0.0, 2.0).unwrap().sample(rng);
        out[1] = Normal::new(-1.0, 1.0).unwrap().sample(rng);
    }
    fn sample_local(&self, _j: usize, _prev: Option<&[f64]>, psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = psi[0] + psi[1].exp() * z;
    }
    // The likelihood ignores psi, so psi moves need no likelihood calls.
    fn loglike_depends_on_psi(&self) -> bool {
        false
    }
    fn force_full_recompute_on_psi(&self) -> bool {
        false
    }
}

fn main() -> nested_swig::Result<()> {
    let counts = vec![
        vec![3, 5, 4],
        vec![0, 1, 2, 1],
        vec![7, 9],
        vec![2, 2, 3, 1, 4],
        vec![5],
        vec![1, 0, 0],
    ];
    let model = PoissonGroups { counts };
    for kernel in [KernelKind::Swig, KernelKind::Nss] {
        let r = run_nested_sampling(&model, &RunConfig { kernel, m: 500, k: 25, ..Default::default() })?;
        println!(
            "{kernel}: log Z = {:.3} ± {:.3}, {:.0} full-likelihood equivalents",
            r.log_z,
            r.sigma_hat,
            r.full_likelihood_equivalents()
        );
    }
    Ok(())
}
