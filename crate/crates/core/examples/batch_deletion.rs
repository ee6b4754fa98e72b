//! Effect of the batch size k on the estimate and on wall time.
//!
//! `cargo run --release --example batch_deletion -- [J]`

use nested_swig::benchmarks::{HierGauss, HierGaussConfig};
use nested_swig::{run_nested_sampling, RunConfig};

fn main() -> nested_swig::Result<()> {
    let j: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let model = HierGauss::new(HierGaussConfig { n_groups: j, ..Default::default() })?;
    let analytic = nested_swig::Model::analytic_logz(&model).unwrap_or(f64::NAN);
    println!("analytic log Z = {analytic:.4}");
    println!("k    log_z     sigma   iterations  secs");
    for k in [1, 10, 25, 50] {
        let r = run_nested_sampling(&model, &RunConfig { k, seed: 1, ..Default::default() })?;
        println!("{k:<4} {:<9.4} {:<7.4} {:<11} {:.2}", r.log_z, r.sigma_hat, r.n_iterations, r.wall_seconds);
    }
    Ok(())
}
