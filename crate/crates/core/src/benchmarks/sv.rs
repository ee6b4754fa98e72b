use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::{Dataset, Model, ModelDims, Structure};
use crate::stats::LN_2PI;

const BETA_A: f64 = 20.0;
const BETA_B: f64 = 1.5;
const MU_SCALE: f64 = 10.0;
const MU_BOUND: f64 = 50.0;
const SIGMA_SCALE: f64 = 2.0;
const SIGMA_BOUND: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvConfig {
    #[serde(rename = "T")]
    pub n_sites: usize,
    pub mu: f64,
    pub beta: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SvConfig {
    fn default() -> Self {
        Self {
            n_sites: 50,
            mu: -1.0,
            beta: 0.95,
            sigma: 0.25,
            seed: 0,
        }
    }
}

impl SvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.abs() < 1.0) || !(self.sigma > 0.0) || self.n_sites == 0 {
            return Err(Error::Config(
                "sv needs |beta| < 1, sigma > 0 and T >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Latent AR(1) path from its stationary start and returns
/// `y_t ~ N(0, exp(theta_t))`. Returns `(theta, y)`.
pub fn generate_sv_data(cfg: &SvConfig) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = Vec::with_capacity(cfg.n_sites);
    let mut y = Vec::with_capacity(cfg.n_sites);
    let sd0 = cfg.sigma / (1.0 - cfg.beta * cfg.beta).sqrt();
    for t in 0..cfg.n_sites {
        let z: f64 = StandardNormal.sample(&mut rng);
        let th = if t == 0 {
            cfg.mu + sd0 * z
        } else {
            cfg.mu + cfg.beta * (theta[t - 1] - cfg.mu) + cfg.sigma * z
        };
        theta.push(th);
        let e: f64 = StandardNormal.sample(&mut rng);
        y.push((0.5 * th).exp() * e);
    }
    (theta, y)
}

/// Stochastic volatility in the centred parameterisation with
/// `psi = (beta, mu, sigma)`:
///
/// - `(beta + 1) / 2 ~ Beta(20, 1.5)`
/// - `mu ~ Cauchy(0, 10)` truncated to `[−50, 50]`
/// - `sigma ~ HalfCauchy(0, 2)` truncated to `(0, 50]`
/// - `theta_0 ~ N(mu, sigma² / (1 − beta²))`,
///   `theta_t | theta_{t−1} ~ N(mu + beta (theta_{t−1} − mu), sigma²)`
/// - `y_t | theta_t ~ N(0, exp(theta_t))`
#[derive(Clone, Debug)]
pub struct SvModel {
    cfg: SvConfig,
    y: Vec<f64>,
    /// `ln y_t²`, `−inf` for zero returns.
    log_y2: Vec<f64>,
    log_norm: f64,
}

impl SvModel {
    pub fn new(cfg: SvConfig) -> Result<Self> {
        cfg.validate()?;
        let (_, y) = generate_sv_data(&cfg);
        Self::with_data(cfg, y)
    }

    pub fn with_data(cfg: SvConfig, y: Vec<f64>) -> Result<Self> {
        if y.len() != cfg.n_sites {
            return Err(Error::DimensionMismatch {
                expected: cfg.n_sites,
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("sv returns must be finite".into()));
        }
        let log_y2 = y.iter().map(|v| 2.0 * v.abs().ln()).collect();
        let log_norm = -ln_beta(BETA_A, BETA_B)
            - 2.0f64.ln()
            - (PI * MU_SCALE).ln()
            - ((2.0 / PI) * (MU_BOUND / MU_SCALE).atan()).ln()
            + (2.0 / (PI * SIGMA_SCALE)).ln()
            - ((2.0 / PI) * (SIGMA_BOUND / SIGMA_SCALE).atan()).ln();
        Ok(Self {
            cfg,
            y,
            log_y2,
            log_norm,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    fn valid(psi: &[f64]) -> bool {
        psi[0].abs() < 1.0 && psi[1].abs() <= MU_BOUND && psi[2] > 0.0 && psi[2] <= SIGMA_BOUND
    }
}

impl Model for SvModel {
    fn name(&self) -> &str {
        "sv"
    }

    fn dims(&self) -> ModelDims {
        ModelDims {
            d_psi: 3,
            n_groups: self.cfg.n_sites,
            d_theta: 1,
        }
    }

    fn structure(&self) -> Structure {
        Structure::Markov
    }

    fn log_prior_hyper(&self, psi: &[f64]) -> f64 {
        if !Self::valid(psi) {
            return f64::NEG_INFINITY;
        }
        let (beta, mu, sigma) = (psi[0], psi[1], psi[2]);
        let u = 0.5 * (beta + 1.0);
        self.log_norm + (BETA_A - 1.0) * u.ln() + (BETA_B - 1.0) * (1.0 - u).ln()
            - (mu / MU_SCALE).powi(2).ln_1p()
            - (sigma / SIGMA_SCALE).powi(2).ln_1p()
    }

    fn log_initial(&self, theta0: &[f64], psi: &[f64]) -> f64 {
        if !Self::valid(psi) {
            return f64::NEG_INFINITY;
        }
        let (beta, mu, sigma) = (psi[0], psi[1], psi[2]);
        let var = sigma * sigma / (1.0 - beta * beta);
        let r = theta0[0] - mu;
        -0.5 * (LN_2PI + var.ln() + r * r / var)
    }

    fn log_transition(&self, prev: &[f64], cur: &[f64], psi: &[f64]) -> f64 {
        if !Self::valid(psi) {
            return f64::NEG_INFINITY;
        }
        let (beta, mu, sigma) = (psi[0], psi[1], psi[2]);
        let r = (cur[0] - mu - beta * (prev[0] - mu)) / sigma;
        -0.5 * (LN_2PI + r * r) - sigma.ln()
    }

    fn group_loglike(&self, theta: &[f64], _psi: &[f64], j: usize) -> f64 {
        let th = theta[0];
        -0.5 * (LN_2PI + th + (self.log_y2[j] - th).exp())
    }

    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let u: f64 = Beta::new(BETA_A, BETA_B).expect("valid").sample(rng);
        out[0] = 2.0 * u - 1.0;
        let v: f64 = rng.random();
        out[1] = MU_SCALE * ((2.0 * v - 1.0) * (MU_BOUND / MU_SCALE).atan()).tan();
        let w: f64 = rng.random();
        out[2] = SIGMA_SCALE * (w * (SIGMA_BOUND / SIGMA_SCALE).atan()).tan();
        // Guard the open ends of the supports against rounding.
        out[0] = out[0].clamp(-1.0 + 1e-15, 1.0 - 1e-15);
        out[2] = out[2].max(f64::MIN_POSITIVE);
    }

    fn sample_local(
        &self,
        _j: usize,
        prev: Option<&[f64]>,
        psi: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) {
        let (beta, mu, sigma) = (psi[0], psi[1], psi[2]);
        let z: f64 = StandardNormal.sample(rng);
        out[0] = match prev {
            None => mu + sigma / (1.0 - beta * beta).sqrt() * z,
            Some(p) => mu + beta * (p[0] - mu) + sigma * z,
        };
    }

    fn loglike_depends_on_psi(&self) -> bool {
        false
    }

    fn dataset(&self) -> Option<Dataset> {
        Some(Dataset {
            model: "sv".into(),
            seed: self.cfg.seed,
            observations: self.y.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{group_loglike, log_blanket_prior, sample_prior};
    use crate::quad::integrate;
    use crate::stats::{lag1_autocorrelation, variance};

    fn model(t: usize) -> SvModel {
        SvModel::new(SvConfig {
            n_sites: t,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn blanket_interior_at_means() {
        let m = model(5);
        let psi = [0.9, 0.0, 1.0];
        let v = log_blanket_prior(&m, 2, Some(&[1.0]), &[0.9], Some(&[0.81]), &psi).unwrap();
        assert!((v - -1.837_877_066_409_345_3).abs() < 1e-12);
    }

    #[test]
    fn blanket_boundaries() {
        let m = model(5);
        let psi = [0.9, 0.0, 1.0];
        let last = log_blanket_prior(&m, 4, Some(&[1.0]), &[0.4], None, &psi).unwrap();
        assert_eq!(last, m.log_transition(&[1.0], &[0.4], &psi));
        let first = log_blanket_prior(&m, 0, None, &[0.4], Some(&[0.2]), &psi).unwrap();
        assert_eq!(first, m.log_initial(&[0.4], &psi) + m.log_transition(&[0.4], &[0.2], &psi));
        assert!(log_blanket_prior(&m, 5, Some(&[1.0]), &[0.4], None, &psi).is_err());
        assert!(log_blanket_prior(&m, 2, None, &[0.4], Some(&[0.2]), &psi).is_err());
    }

    #[test]
    fn zero_return_likelihood() {
        let cfg = SvConfig {
            n_sites: 2,
            ..Default::default()
        };
        let m = SvModel::with_data(cfg, vec![0.0, 1.0]).unwrap();
        for th in [-3.0, 0.0, 2.5] {
            let l = group_loglike(&m, &[th], &[0.9, 0.0, 1.0], 0).unwrap();
            assert!((l - -0.5 * (LN_2PI + th)).abs() < 1e-14);
        }
    }

    #[test]
    fn conditional_prior_on_markov_model_is_a_contract_error() {
        let m = model(3);
        assert!(crate::model::log_conditional_prior(&m, &[0.0], &[0.9, 0.0, 1.0], 0).is_err());
    }

    #[test]
    fn hyperprior_is_normalised() {
        let m = model(1);
        let beta = integrate(
            |b| {
                let u: f64 = 0.5 * (b + 1.0);
                ((BETA_A - 1.0) * u.ln() + (BETA_B - 1.0) * (1.0 - u).ln() - ln_beta(BETA_A, BETA_B)).exp() * 0.5
            },
            -1.0,
            1.0,
            1e-10,
            0.0,
        )
        .unwrap()
        .value;
        assert!((beta - 1.0).abs() < 1e-8);
        let total = integrate(
            |b| {
                integrate(
                    |mu| {
                        integrate(|s| m.log_prior_hyper(&[b, mu, s]).exp(), 0.0, 50.0, 1e-12, 1e-10)
                            .unwrap()
                            .value
                    },
                    -50.0,
                    50.0,
                    1e-10,
                    1e-9,
                )
                .unwrap()
                .value
            },
            0.0,
            1.0,
            1e-8,
            1e-8,
        )
        .unwrap()
        .value;
        // The beta marginal mass on (0, 1) is computed separately.
        let beta_mass = integrate(
            |b| {
                let u: f64 = 0.5 * (b + 1.0);
                ((BETA_A - 1.0) * u.ln() + (BETA_B - 1.0) * (1.0 - u).ln() - ln_beta(BETA_A, BETA_B)).exp() * 0.5
            },
            0.0,
            1.0,
            1e-12,
            0.0,
        )
        .unwrap()
        .value;
        assert!((total / beta_mass - 1.0).abs() < 1e-6, "{total} vs {beta_mass}");
    }

    #[test]
    fn generator_ar1_moments() {
        let cfg = SvConfig {
            n_sites: 10_000,
            seed: 4,
            ..Default::default()
        };
        let (theta, y) = generate_sv_data(&cfg);
        assert_eq!(y.len(), 10_000);
        assert!((lag1_autocorrelation(&theta) - 0.95).abs() < 0.05);
        let stat = 0.25f64.powi(2) / (1.0 - 0.95f64.powi(2));
        assert!((variance(&theta) / stat - 1.0).abs() < 0.1);
        let iid = SvConfig {
            beta: 0.0,
            ..cfg
        };
        let (theta, _) = generate_sv_data(&iid);
        assert!(lag1_autocorrelation(&theta).abs() < 0.05);
    }

    #[test]
    fn prior_chain_autocorrelation() {
        let m = model(5000);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = sample_prior(&m, &mut rng).unwrap();
        let beta = s.psi()[0];
        let r = lag1_autocorrelation(s.thetas());
        assert!((r - beta).abs() < 0.05, "{r} vs {beta}");
        assert_eq!(s.cache_error(), 0.0);
    }

    #[test]
    fn hyper_draws_stay_in_support() {
        let m = model(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut psi = [0.0; 3];
        for _ in 0..100_000 {
            m.sample_hyper(&mut rng, &mut psi);
            assert!(m.log_prior_hyper(&psi).is_finite());
        }
    }
}
