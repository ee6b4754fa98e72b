use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnalyticInformation, Dataset, Model, ModelDims, Structure};
use crate::stats::{gaussian_kl, LN_2PI};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HierGaussConfig {
    pub mu0: f64,
    pub sigma_psi: f64,
    pub sigma_theta: f64,
    pub sigma_obs: f64,
    #[serde(rename = "J")]
    pub n_groups: usize,
    pub psi_true: f64,
    pub seed: u64,
}

impl Default for HierGaussConfig {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            sigma_psi: 10.0,
            sigma_theta: 2.0,
            sigma_obs: 1.0,
            n_groups: 10,
            psi_true: 3.0,
            seed: 0,
        }
    }
}

impl HierGaussConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_psi > 0.0 && self.sigma_theta > 0.0 && self.sigma_obs > 0.0) {
            return Err(Error::Config("hier_gauss standard deviations must be positive".into()));
        }
        if self.n_groups == 0 {
            return Err(Error::Config("hier_gauss needs J >= 1".into()));
        }
        Ok(())
    }

    fn tau2(&self) -> f64 {
        self.sigma_theta.powi(2) + self.sigma_obs.powi(2)
    }
}

/// `theta_j ~ N(psi_true, σθ²)`, `y_j ~ N(theta_j, σobs²)`.
pub fn generate_hg_data(cfg: &HierGaussConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.n_groups)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let theta = cfg.psi_true + cfg.sigma_theta * z1;
            theta + cfg.sigma_obs * z2
        })
        .collect()
}

/// `log N(y; μ0·1, τ²I + σψ²·11ᵀ)` via the rank-one determinant and
/// Sherman-Morrison identities.
pub fn hg_analytic_logz(y: &[f64], cfg: &HierGaussConfig) -> f64 {
    let j = y.len() as f64;
    let tau2 = cfg.tau2();
    let s2 = cfg.sigma_psi.powi(2);
    let logdet = (j - 1.0) * tau2.ln() + (tau2 + j * s2).ln();
    let (mut rr, mut sum) = (0.0, 0.0);
    for &v in y {
        let r = v - cfg.mu0;
        rr += r * r;
        sum += r;
    }
    let quad = (rr - s2 * sum * sum / (tau2 + j * s2)) / tau2;
    -0.5 * (j * LN_2PI + logdet + quad)
}

/// Hierarchical Gaussian: `psi ~ N(μ0, σψ²)`, `theta_j | psi ~ N(psi, σθ²)`,
/// `y_j | theta_j ~ N(theta_j, σobs²)`.
#[derive(Clone, Debug)]
pub struct HierGauss {
    cfg: HierGaussConfig,
    y: Vec<f64>,
    log_z: f64,
    c_psi: f64,
    c_theta: f64,
    c_obs: f64,
}

impl HierGauss {
    /// Generates data from `cfg.seed`.
    pub fn new(cfg: HierGaussConfig) -> Result<Self> {
        let y = generate_hg_data(&cfg);
        Self::with_data(cfg, y)
    }

    pub fn with_data(cfg: HierGaussConfig, y: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if y.len() != cfg.n_groups {
            return Err(Error::DimensionMismatch {
                expected: cfg.n_groups,
                got: y.len(),
            });
        }
        let log_z = hg_analytic_logz(&y, &cfg);
        let c = |s: f64| -0.5 * (LN_2PI + 2.0 * s.ln());
        Ok(Self {
            c_psi: c(cfg.sigma_psi),
            c_theta: c(cfg.sigma_theta),
            c_obs: c(cfg.sigma_obs),
            cfg,
            y,
            log_z,
        })
    }

    pub fn config(&self) -> &HierGaussConfig {
        &self.cfg
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    /// Posterior mean and variance of `psi` given all data.
    pub fn posterior_psi(&self) -> (f64, f64) {
        let c = &self.cfg;
        let tau2 = c.tau2();
        let prec = 1.0 / c.sigma_psi.powi(2) + self.y.len() as f64 / tau2;
        let v = 1.0 / prec;
        let sum: f64 = self.y.iter().sum();
        (v * (c.mu0 / c.sigma_psi.powi(2) + sum / tau2), v)
    }

    /// Conditional posterior of `theta_j` given `psi` and `y_j`.
    pub fn conditional_theta(&self, j: usize, psi: f64) -> (f64, f64) {
        let c = &self.cfg;
        let s2 = 1.0 / (1.0 / c.sigma_theta.powi(2) + 1.0 / c.sigma_obs.powi(2));
        (s2 * (psi / c.sigma_theta.powi(2) + self.y[j] / c.sigma_obs.powi(2)), s2)
    }

    /// Conditional posterior of `psi` given the local parameters, ignoring
    /// the data (which only enter through `theta`).
    pub fn conditional_psi(&self, thetas: &[f64]) -> (f64, f64) {
        let c = &self.cfg;
        let prec = 1.0 / c.sigma_psi.powi(2) + thetas.len() as f64 / c.sigma_theta.powi(2);
        let sum: f64 = thetas.iter().sum();
        let v = 1.0 / prec;
        (v * (c.mu0 / c.sigma_psi.powi(2) + sum / c.sigma_theta.powi(2)), v)
    }
}

impl Model for HierGauss {
    fn name(&self) -> &str {
        "hier_gauss"
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
        let r = (psi[0] - self.cfg.mu0) / self.cfg.sigma_psi;
        self.c_psi - 0.5 * r * r
    }

    fn log_conditional_prior(&self, theta: &[f64], psi: &[f64], _j: usize) -> f64 {
        let r = (theta[0] - psi[0]) / self.cfg.sigma_theta;
        self.c_theta - 0.5 * r * r
    }

    fn group_loglike(&self, theta: &[f64], _psi: &[f64], j: usize) -> f64 {
        let r = (self.y[j] - theta[0]) / self.cfg.sigma_obs;
        self.c_obs - 0.5 * r * r
    }

    fn sample_hyper(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let n = Normal::new(self.cfg.mu0, self.cfg.sigma_psi).expect("validated");
        out[0] = n.sample(rng);
    }

    fn sample_local(
        &self,
        _j: usize,
        _prev: Option<&[f64]>,
        psi: &[f64],
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = psi[0] + self.cfg.sigma_theta * z;
    }

    fn loglike_depends_on_psi(&self) -> bool {
        false
    }

    fn analytic_logz(&self) -> Option<f64> {
        Some(self.log_z)
    }

    /// `H = KL(p(psi|y) ‖ π(psi)) + Σ_j E_{psi|y} KL(p(theta_j|psi,y_j) ‖ π(theta_j|psi))`.
    fn analytic_information(&self) -> Option<AnalyticInformation> {
        let c = &self.cfg;
        let (m_psi, v_psi) = self.posterior_psi();
        let h_psi = gaussian_kl(m_psi, v_psi, c.mu0, c.sigma_psi.powi(2));
        let st2 = c.sigma_theta.powi(2);
        let so2 = c.sigma_obs.powi(2);
        let s2 = 1.0 / (1.0 / st2 + 1.0 / so2);
        let shrink = s2 / so2;
        let h_groups = self
            .y
            .iter()
            .map(|&yj| {
                let e_sq = (yj - m_psi).powi(2) + v_psi;
                0.5 * (s2 / st2 + shrink * shrink * e_sq / st2 - 1.0 + (st2 / s2).ln())
            })
            .collect();
        Some(AnalyticInformation { h_psi, h_groups })
    }

    fn dataset(&self) -> Option<Dataset> {
        Some(Dataset {
            model: "hier_gauss".into(),
            seed: self.cfg.seed,
            observations: self.y.clone(),
        })
    }
}
