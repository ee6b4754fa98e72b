//! Reference models with analytic or quadrature evidences, synthetic data
//! generators and evaluation accounting.

mod desk;
mod funnel;
mod hier_gauss;
mod sv;

pub use desk::{ArGauss, FlatModel, StepModel};
pub use funnel::{funnel_analytic_logz, Funnel, FunnelConfig};
pub use hier_gauss::{generate_hg_data, hg_analytic_logz, HierGauss, HierGaussConfig};
pub use sv::{generate_sv_data, SvConfig, SvModel};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Model;

/// Cost accounting in group calls, reported as full-likelihood equivalents
/// where `J` group calls make one full evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalCounter {
    pub group_calls: u64,
    pub n_groups: usize,
}

impl EvalCounter {
    pub fn new(n_groups: usize) -> Self {
        Self {
            group_calls: 0,
            n_groups,
        }
    }

    pub fn count_group_calls(&mut self, calls: u64) {
        self.group_calls += calls;
    }

    /// Adds `n` full evaluations, e.g. hyperparameter checks under forced
    /// recomputation.
    pub fn count_full(&mut self, n: u64) {
        self.group_calls += n * self.n_groups as u64;
    }

    pub fn full_equivalents(&self) -> f64 {
        self.group_calls as f64 / self.n_groups as f64
    }
}

/// Model selection for experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelConfig {
    HierGauss(HierGaussConfig),
    Funnel(FunnelConfig),
    Sv(SvConfig),
}

impl ModelConfig {
    pub fn build(&self) -> Result<Box<dyn Model>> {
        Ok(match self {
            Self::HierGauss(c) => Box::new(HierGauss::new(c.clone())?),
            Self::Funnel(c) => Box::new(Funnel::new(c.clone())?),
            Self::Sv(c) => Box::new(SvModel::new(c.clone())?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::HierGauss(_) => "hier_gauss",
            Self::Funnel(_) => "funnel",
            Self::Sv(_) => "sv",
        }
    }

    /// Seed of the synthetic data, if the model generates any.
    pub fn data_seed(&self) -> Option<u64> {
        match self {
            Self::HierGauss(c) => Some(c.seed),
            Self::Funnel(_) => None,
            Self::Sv(c) => Some(c.seed),
        }
    }

    pub fn set_data_seed(&mut self, seed: u64) {
        match self {
            Self::HierGauss(c) => c.seed = seed,
            Self::Funnel(_) => {}
            Self::Sv(c) => c.seed = seed,
        }
    }

    pub fn set_n_groups(&mut self, n: usize) {
        match self {
            Self::HierGauss(c) => c.n_groups = n,
            Self::Funnel(c) => c.n_groups = n,
            Self::Sv(c) => c.n_sites = n,
        }
    }

    pub fn n_groups(&self) -> usize {
        match self {
            Self::HierGauss(c) => c.n_groups,
            Self::Funnel(c) => c.n_groups,
            Self::Sv(c) => c.n_sites,
        }
    }
}
