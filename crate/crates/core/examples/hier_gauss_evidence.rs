//! Evidence for the conjugate hierarchical Gaussian against its closed form.
//!
//! `cargo run --release --example hier_gauss_evidence -- [J] [seeds]`

use nested_swig::benchmarks::{HierGauss, HierGaussConfig};
use nested_swig::{run_nested_sampling, RunConfig};

fn main() -> nested_swig::Result<()> {
    let mut args = std::env::args().skip(1);
    let j: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    println!("seed  log_z      sigma    analytic   z_score  full_evals  secs");
    for seed in 0..seeds {
        let model = HierGauss::new(HierGaussConfig {
            n_groups: j,
            seed,
            ..Default::default()
        })?;
        let cfg = RunConfig {
            seed,
            ..Default::default()
        };
        let r = run_nested_sampling(&model, &cfg)?;
        let truth = r.analytic_logz.unwrap_or(f64::NAN);
        println!(
            "{seed:<5} {:<10.4} {:<8.4} {:<10.4} {:<8.2} {:<11.0} {:.2}",
            r.log_z,
            r.sigma_hat,
            truth,
            (r.log_z - truth) / r.sigma_hat,
            r.full_likelihood_equivalents(),
            r.wall_seconds
        );
    }
    Ok(())
}
