//! Audit mode: every local step re-checks the budget identity, the cached
//! sums and feasibility, and an independent counter confirms the reported
//! number of likelihood calls.
//!
//! `cargo run --release --example budget_audit`

use nested_swig::benchmarks::{Funnel, FunnelConfig};
use nested_swig::model::CountingModel;
use nested_swig::{run_nested_sampling, KernelConfig, RunConfig};

fn main() -> nested_swig::Result<()> {
    let model = CountingModel::new(Funnel::new(FunnelConfig::default())?);
    let cfg = RunConfig {
        m: 200,
        k: 10,
        kernel_cfg: KernelConfig { audit: true, ..Default::default() },
        ..Default::default()
    };
    let r = run_nested_sampling(&model, &cfg)?;
    let s = &r.stats;
    println!("log Z            {:.4} ± {:.4}", r.log_z, r.sigma_hat);
    println!("slice steps      {}", s.slice_steps);
    println!("local checks     {}", s.local_checks);
    println!("psi checks       {}", s.psi_checks);
    println!("audit checks     {}", s.audit_checks);
    println!("violations       {}", s.violations());
    println!("counted calls    {}", model.calls());
    println!("accounted calls  {} (work {} + audit {})", r.n_group_calls + s.audit_group_calls, r.n_group_calls, s.audit_group_calls);
    Ok(())
}
