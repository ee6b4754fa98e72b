//! Likelihood cost against the number of groups for SwiG and the joint-space
//! baseline, with log-log slopes.
//!
//! `cargo run --release --example cost_scaling -- [out_dir]`

use nested_swig::benchmarks::{HierGaussConfig, ModelConfig};
use nested_swig::diag::{scaling_study, ExperimentConfig, ScalingSpec};
use nested_swig::KernelKind;

fn main() -> nested_swig::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/example_scaling".into());
    let mut cfg = ExperimentConfig::new(ModelConfig::HierGauss(HierGaussConfig::default()));
    cfg.run.m = 100;
    cfg.run.k = 5;
    cfg.experiment.output_dir = out.into();
    cfg.scaling = Some(ScalingSpec {
        kernels: vec![KernelKind::Swig, KernelKind::Nss],
        n_groups: vec![5, 10, 20, 40],
    });
    let report = scaling_study(&cfg)?;
    println!("kernel J    full_evals  log_z     analytic");
    for r in &report.rows {
        println!(
            "{:<6} {:<4} {:<11.0} {:<9.3} {:.3}",
            r.kernel,
            r.n_groups,
            r.full_evals,
            r.log_z,
            r.analytic_logz.unwrap_or(f64::NAN)
        );
    }
    for s in &report.slopes {
        println!("{}: slope {:.3} (95% CI {:.3} to {:.3})", s.kernel, s.fit.slope, s.ci95.0, s.ci95.1);
    }
    Ok(())
}
