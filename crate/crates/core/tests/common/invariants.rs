//! Audited nested sampling runs: budget identity, cache consistency,
//! feasibility and call accounting, checked independently of the kernels'
//! own counters through a counting wrapper.

use nested_swig::benchmarks::{ArGauss, Funnel, FunnelConfig, SvConfig, SvModel};
use nested_swig::model::{CountingModel, Model};
use nested_swig::{run_nested_sampling, KernelConfig, KernelKind, RunConfig};

use super::{hg, DiskModel};

#[derive(Clone, Debug)]
pub struct AuditRow {
    pub model: String,
    pub kernel: KernelKind,
    pub slice_steps: u64,
    pub local_checks: u64,
    pub violations: u64,
    /// Calls seen by the counting wrapper.
    pub calls: u64,
    /// Calls the run accounted for (work plus audit).
    pub accounted: u64,
}

impl AuditRow {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.calls == self.accounted
    }
}

fn audited<M: Model>(model: M, kernel: KernelKind, m: usize, k: usize, seed: u64) -> AuditRow {
    let counted = CountingModel::new(model);
    let cfg = RunConfig {
        m,
        k,
        kernel,
        seed,
        kernel_cfg: KernelConfig {
            audit: true,
            ..Default::default()
        },
        ..Default::default()
    };
    let run = run_nested_sampling(&counted, &cfg).unwrap();
    AuditRow {
        model: counted.name().to_string(),
        kernel,
        slice_steps: run.stats.slice_steps,
        local_checks: run.stats.local_checks,
        violations: run.stats.violations(),
        calls: counted.calls(),
        accounted: run.n_group_calls + run.stats.audit_group_calls,
    }
}

pub fn ar_gauss(n: usize) -> ArGauss {
    ArGauss {
        mu: 0.2,
        beta: 0.9,
        sigma: 0.5,
        obs_sd: 0.8,
        y: (0..n).map(|t| (0.3 * t as f64).sin() + 0.2).collect(),
    }
}

/// Runs audited SwiG (and some baseline) runs over a mix of iid, Markov,
/// ψ-dependent and plateau-free models until the kernels have taken at
/// least `min_steps` slice steps in total.
pub fn suite(min_steps: u64) -> Vec<AuditRow> {
    let mut rows = Vec::new();
    let mut total = 0;
    let mut seed = 0u64;
    while total < min_steps {
        let batch = [
            audited(hg(10, seed), KernelKind::Swig, 100, 5, seed),
            audited(Funnel::new(FunnelConfig::default()).unwrap(), KernelKind::Swig, 100, 5, seed),
            audited(
                SvModel::new(SvConfig { n_sites: 20, seed, ..Default::default() }).unwrap(),
                KernelKind::Swig,
                50,
                5,
                seed,
            ),
            audited(ar_gauss(30), KernelKind::Swig, 100, 5, seed),
            audited(DiskModel::default(), KernelKind::Swig, 100, 5, seed),
            audited(hg(10, seed), KernelKind::Nss, 100, 5, seed),
        ];
        for r in batch {
            total += r.slice_steps;
            rows.push(r);
        }
        seed += 1;
    }
    rows
}
