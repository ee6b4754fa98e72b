use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::{Model, ModelDims, Structure};
use crate::quad::integrate;
use crate::stats::LN_2PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunnelConfig {
    pub sigma_psi_sq: f64,
    #[serde(rename = "J")]
    pub n_groups: usize,
    /// Half-width `b` of the uniform prior on each `theta_j`.
    pub theta_bound: f64,
}

impl Default for FunnelConfig {
    fn default() -> Self {
        Self {
            sigma_psi_sq: 9.0,
            n_groups: 10,
            theta_bound: 100.0,
        }
    }
}

impl FunnelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_psi_sq > 0.0 && self.theta_bound > 0.0) || self.n_groups == 0 {
            return Err(Error::Config(
                "funnel needs sigma_psi_sq > 0, theta_bound > 0 and J >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// `log ∫ N(psi; 0, σψ²) [ (Φ(b e^{−psi/2}) − Φ(−b e^{−psi/2})) / (2b) ]^J dpsi`
/// by adaptive quadrature over `[−40, 40]`.
pub fn funnel_analytic_logz(cfg: &FunnelConfig) -> Result<f64> {
    funnel_logz_with_tol(cfg, 1e-6)
}

pub(crate) fn funnel_logz_with_tol(cfg: &FunnelConfig, abs_tol: f64) -> Result<f64> {
    cfg.validate()?;
    let b = cfg.theta_bound;
    let v = cfg.sigma_psi_sq;
    let j = cfg.n_groups as i32;
    let r = integrate(
        |psi: f64| {
            let mass = erf(b * (-0.5 * psi).exp() / std::f64::consts::SQRT_2);
            (-0.5 * (LN_2PI + v.ln() + psi * psi / v)).exp() * mass.powi(j)
        },
        -40.0,
        40.0,
        abs_tol,
        0.0,
    )?;
    Ok(r.value.ln() - cfg.n_groups as f64 * (2.0 * b).ln())
}

/// Neal's funnel with the Gaussian conditionals as per-group likelihoods:
/// `psi ~ N(0, σψ²)`, `theta_j ~ U(−b, b)`, `ℓ_j = log N(theta_j; 0, e^psi)`.
#[derive(Clone, Debug)]
pub struct Funnel {
    cfg: FunnelConfig,
    log_z: f64,
    c_psi: f64,
    log_width: f64,
}

impl Funnel {
    pub fn new(cfg: FunnelConfig) -> Result<Self> {
        let log_z = funnel_analytic_logz(&cfg)?;
        Ok(Self {
            c_psi: -0.5 * (LN_2PI + cfg.sigma_psi_sq.ln()),
            log_width: (2.0 * cfg.theta_bound).ln(),
            cfg,
            log_z,
        })
    }

    pub fn config(&self) -> &FunnelConfig {
        &self.cfg
    }

    /// Posterior density of `(psi, theta_0)` on the given point, normalised
    /// by the evidence.
    pub fn log_posterior_psi_theta0(&self, psi: f64, theta0: f64) -> f64 {
        let b = self.cfg.theta_bound;
        if theta0.abs() > b {
            return f64::NEG_INFINITY;
        }
        let j = self.cfg.n_groups as f64;
        let others = (j - 1.0)
            * (erf(b * (-0.5 * psi).exp() / std::f64::consts::SQRT_2).ln() - self.log_width);
        self.log_prior_hyper(&[psi]) - self.log_width + self.group_loglike(&[theta0], &[psi], 0)
            + others
            - self.log_z
    }
}

impl Model for Funnel {
    fn name(&self) -> &str {
        "funnel"
    }

    fn dims(&self) -> ModelDims {
        ModelDims {
            d_psi: 1,
            n_groups: self.cfg.n_groups,
            d_theta: 1,
        }
    }

    fn structure(&self) -> Structure {
        Structure::Iid
    }

    fn log_prior_hyper(&self, psi: &[f64]) -> f64 {
        self.c_psi - 0.5 * psi[0] * psi[0] / self.cfg.sigma_psi_sq
    }

    fn log_conditional_prior(&self, theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        if theta[0].abs() <= self.cfg.theta_bound {
            -self.log_width
        } else {
            f64::NEG_INFINITY
        }
    }

    fn group_loglike(&self, theta: &[f64], psi: &[f64], _j: usize) -> f64 {
        -0.5 * (LN_2PI + psi[0] + theta[0] * theta[0] * (-psi[0]).exp())
    }

    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = self.cfg.sigma_psi_sq.sqrt() * z;
    }

    fn sample_local(
        &self,
        _j: usize,
        _prev: Option<&[f64]>,
        _psi: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) {
        let b = self.cfg.theta_bound;
        out[0] = rng.random_range(-b..b);
    }

    fn analytic_logz(&self) -> Option<f64> {
        Some(self.log_z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_conditional_prior, log_prior_hyper, sample_prior};
    use crate::quad::integrate;
    use crate::stats::ks_test;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn op_examples() {
        let f = Funnel::new(FunnelConfig::default()).unwrap();
        assert!((log_prior_hyper(&f, &[0.0]).unwrap() - -2.017_550_821_872_782_2).abs() < 1e-12);
        assert!((log_conditional_prior(&f, &[0.0], &[0.0], 3).unwrap() - -5.298_317_366_548_036).abs() < 1e-12);
        assert_eq!(log_conditional_prior(&f, &[150.0], &[0.0], 3).unwrap(), f64::NEG_INFINITY);
        assert!((f.group_loglike(&[0.0], &[0.0], 0) - -0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn paper_configuration_evidence() {
        let z = funnel_analytic_logz(&FunnelConfig::default()).unwrap();
        // Independent reference from a separate numerical integration.
        assert!((z - -52.987_439_022_100_72).abs() < 1e-6, "{z}");
        assert!((z - -52.98).abs() < 0.01);
        assert!((z - -52.983_173_665_480_365).abs() < 0.01);
    }

    #[test]
    fn evidence_stable_under_tolerance_refinement() {
        let cfg = FunnelConfig::default();
        let a = funnel_logz_with_tol(&cfg, 1e-6).unwrap();
        let b = funnel_logz_with_tol(&cfg, 5e-7).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn single_group_matches_monte_carlo() {
        let cfg = FunnelConfig {
            n_groups: 1,
            ..Default::default()
        };
        let f = Funnel::new(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000_000usize;
        let (mut s, mut s2) = (0.0, 0.0);
        let mut psi = [0.0];
        let mut th = [0.0];
        for _ in 0..n {
            f.sample_hyper(&mut rng, &mut psi);
            f.sample_local(0, None, &psi, &mut rng, &mut th);
            let l = f.group_loglike(&th, &psi, 0).exp();
            s += l;
            s2 += l * l;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let z = funnel_analytic_logz(&cfg).unwrap().exp();
        assert!((mean - z).abs() < 3.0 * se, "{mean} ± {se} vs {z}");
    }

    #[test]
    fn local_prior_draws_are_uniform() {
        let f = Funnel::new(FunnelConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sample_prior(&f, &mut rng).unwrap().theta(4)[0])
            .collect();
        let ks = ks_test(&draws, |x| ((x + 100.0) / 200.0).clamp(0.0, 1.0));
        assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
    }

    #[test]
    fn posterior_marginal_integrates_to_one() {
        let f = Funnel::new(FunnelConfig::default()).unwrap();
        let outer = integrate(
            |psi| {
                let b = 100.0;
                let scale = (0.5 * psi).exp();
                // Integrand is concentrated in |theta| < 12 e^{psi/2}.
                let w = (12.0 * scale).min(b);
                integrate(|t| f.log_posterior_psi_theta0(psi, t).exp(), -w, w, 1e-12, 1e-8)
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN)
            },
            -15.0,
            15.0,
            1e-8,
            1e-6,
        )
        .unwrap();
        assert!((outer.value - 1.0).abs() < 1e-4, "{}", outer.value);
    }
}
