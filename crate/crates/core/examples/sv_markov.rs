//! Markov SwiG on synthetic stochastic volatility, checked against the
//! joint-space baseline on the same data.
//!
//! `cargo run --release --example sv_markov -- [T] [swig_sweeps] [seeds]`

use nested_swig::benchmarks::{SvConfig, SvModel};
use nested_swig::{run_nested_sampling, KernelConfig, KernelKind, RunConfig};

fn main() -> nested_swig::Result<()> {
    let mut args = std::env::args().skip(1);
    let t: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let sweeps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(60);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let model = SvModel::new(SvConfig { n_sites: t, ..Default::default() })?;
    println!("kernel sweeps seed  log_z     sigma   full_evals  secs");
    for (kernel, m) in [(KernelKind::Swig, sweeps), (KernelKind::Nss, 5)] {
        for seed in 0..seeds {
            let cfg = RunConfig {
                kernel,
                seed,
                kernel_cfg: KernelConfig { sweeps: m, ..Default::default() },
                ..Default::default()
            };
            let r = run_nested_sampling(&model, &cfg)?;
            println!(
                "{kernel:<6} {m:<6} {seed:<5} {:<9.3} {:<7.3} {:<11.0} {:.1}",
                r.log_z,
                r.sigma_hat,
                r.full_likelihood_equivalents(),
                r.wall_seconds
            );
        }
    }
    Ok(())
}
