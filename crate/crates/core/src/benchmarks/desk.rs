use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use crate::model::{Model, ModelDims, Structure};
use crate::stats::LN_2PI;

/// Uniform prior on `[0, 1]^J` with constant likelihood `ℓ ≡ ln c`.
#[derive(Clone, Debug)]
pub struct FlatModel {
    pub log_c: f64,
    pub n_groups: usize,
}

impl Model for FlatModel {
    fn name(&self) -> &str {
        "flat"
    }
    fn dims(&self) -> ModelDims {
        ModelDims {
            d_psi: 0,
            n_groups: self.n_groups,
            d_theta: 1,
        }
    }
    fn structure(&self) -> Structure {
        Structure::Iid
    }
    fn log_prior_hyper(&self, _psi: &[f64]) -> f64 {
        0.0
    }
    fn log_conditional_prior(&self, theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        if (0.0..=1.0).contains(&theta[0]) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
    fn group_loglike(&self, _theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        self.log_c / self.n_groups as f64
    }
    fn sample_hyper(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) {}
    fn sample_local(&self, _j: usize, _prev: Option<&[f64]>, _psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = rng.random();
    }
    fn analytic_logz(&self) -> Option<f64> {
        Some(self.log_c)
    }
}

/// Uniform prior on `[0, 1]` with `L(x) = 2·1[x > 0.5]`, so `Z = 1`.
#[derive(Clone, Debug, Default)]
pub struct StepModel;

impl Model for StepModel {
    fn name(&self) -> &str {
        "step"
    }
    fn dims(&self) -> ModelDims {
        ModelDims {
            d_psi: 0,
            n_groups: 1,
            d_theta: 1,
        }
    }
    fn structure(&self) -> Structure {
        Structure::Iid
    }
    fn log_prior_hyper(&self, _psi: &[f64]) -> f64 {
        0.0
    }
    fn log_conditional_prior(&self, theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        if (0.0..=1.0).contains(&theta[0]) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }
    fn group_loglike(&self, theta: &[f64], _psi: &[f64], _j: usize) -> f64 {
        if theta[0] > 0.5 {
            std::f64::consts::LN_2
        } else {
            f64::NEG_INFINITY
        }
    }
    fn sample_hyper(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) {}
    fn sample_local(&self, _j: usize, _prev: Option<&[f64]>, _psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        out[0] = rng.random();
    }
    fn analytic_logz(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Gaussian AR(1) chain with fixed parameters and Gaussian observations
/// `y_t ~ N(theta_t, obs_sd²)`. No hyperparameters, so every full
/// conditional is Gaussian and available in closed form.
#[derive(Clone, Debug)]
pub struct ArGauss {
    pub mu: f64,
    pub beta: f64,
    pub sigma: f64,
    pub obs_sd: f64,
    pub y: Vec<f64>,
}

impl ArGauss {
    /// Mean and variance of `theta_t` given its neighbours and `y_t`.
    pub fn full_conditional(&self, t: usize, prev: Option<f64>, next: Option<f64>) -> (f64, f64) {
        let s2 = self.sigma * self.sigma;
        let mut prec = 1.0 / (self.obs_sd * self.obs_sd);
        let mut lin = self.y[t] * prec;
        match prev {
            Some(p) => {
                prec += 1.0 / s2;
                lin += (self.mu + self.beta * (p - self.mu)) / s2;
            }
            None => {
                let v0 = s2 / (1.0 - self.beta * self.beta);
                prec += 1.0 / v0;
                lin += self.mu / v0;
            }
        }
        if let Some(n) = next {
            // N(n; mu + beta (theta - mu), s2) as a function of theta.
            prec += self.beta * self.beta / s2;
            lin += self.beta * (n - self.mu + self.beta * self.mu) / s2;
        }
        (lin / prec, 1.0 / prec)
    }
}

impl Model for ArGauss {
    fn name(&self) -> &str {
        "ar_gauss"
    }
    fn dims(&self) -> ModelDims {
        ModelDims {
            d_psi: 0,
            n_groups: self.y.len(),
            d_theta: 1,
        }
    }
    fn structure(&self) -> Structure {
        Structure::Markov
    }
    fn log_prior_hyper(&self, _psi: &[f64]) -> f64 {
        0.0
    }
    fn log_initial(&self, theta0: &[f64], _psi: &[f64]) -> f64 {
        let var = self.sigma * self.sigma / (1.0 - self.beta * self.beta);
        let r = theta0[0] - self.mu;
        -0.5 * (LN_2PI + var.ln() + r * r / var)
    }
    fn log_transition(&self, prev: &[f64], cur: &[f64], _psi: &[f64]) -> f64 {
        let r = (cur[0] - self.mu - self.beta * (prev[0] - self.mu)) / self.sigma;
        -0.5 * (LN_2PI + r * r) - self.sigma.ln()
    }
    fn group_loglike(&self, theta: &[f64], _psi: &[f64], j: usize) -> f64 {
        let r = (self.y[j] - theta[0]) / self.obs_sd;
        -0.5 * (LN_2PI + r * r) - self.obs_sd.ln()
    }
    fn sample_hyper(&self, _rng: &mut dyn RngCore, _out: &mut [f64]) {}
    fn sample_local(&self, _j: usize, prev: Option<&[f64]>, _psi: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let z: f64 = StandardNormal.sample(rng);
        out[0] = match prev {
            None => self.mu + self.sigma / (1.0 - self.beta * self.beta).sqrt() * z,
            Some(p) => self.mu + self.beta * (p[0] - self.mu) + self.sigma * z,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar_full_conditional_matches_product_of_terms() {
        let m = ArGauss {
            mu: 0.3,
            beta: 0.7,
            sigma: 0.8,
            obs_sd: 1.3,
            y: vec![0.1, -0.4, 1.2],
        };
        // The log of the unnormalised conditional is quadratic; its second
        // difference and stationary point give the precision and mean.
        for (t, prev, next) in [(0, None, Some(0.5)), (1, Some(-0.2), Some(0.9)), (2, Some(1.0), None)] {
            let f = |x: f64| {
                let own = match prev {
                    Some(p) => m.log_transition(&[p], &[x], &[]),
                    None => m.log_initial(&[x], &[]),
                };
                let nxt = next.map_or(0.0, |n| m.log_transition(&[x], &[n], &[]));
                own + nxt + m.group_loglike(&[x], &[], t)
            };
            let h = 1e-3;
            let prec = -(f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
            let grad0 = (f(h) - f(-h)) / (2.0 * h);
            let mean = grad0 / prec;
            let (want_m, want_v) = m.full_conditional(t, prev, next);
            assert!((1.0 / prec - want_v).abs() < 1e-6, "var at {t}");
            assert!((mean - want_m).abs() < 1e-6, "mean at {t}");
        }
    }
}
