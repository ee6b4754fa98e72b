//! Neal's funnel: evidence against adaptive quadrature of the closed form,
//! for both kernels.
//!
//! `cargo run --release --example funnel_evidence -- [seeds]`

use nested_swig::benchmarks::{funnel_analytic_logz, Funnel, FunnelConfig};
use nested_swig::{run_nested_sampling, KernelKind, RunConfig};

fn main() -> nested_swig::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = FunnelConfig::default();
    let truth = funnel_analytic_logz(&cfg)?;
    let model = Funnel::new(cfg)?;
    println!("quadrature log Z = {truth:.5}");
    println!("kernel seed  log_z     sigma   z_score  full_evals  ess");
    for kernel in [KernelKind::Swig, KernelKind::Nss] {
        for seed in 0..seeds {
            let r = run_nested_sampling(&model, &RunConfig { kernel, seed, ..Default::default() })?;
            println!(
                "{kernel:<6} {seed:<5} {:<9.4} {:<7.4} {:<8.2} {:<11.0} {:.0}",
                r.log_z,
                r.sigma_hat,
                (r.log_z - truth) / r.sigma_hat,
                r.full_likelihood_equivalents(),
                r.ess
            );
        }
    }
    Ok(())
}
