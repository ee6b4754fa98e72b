//! Runs a small experiment and writes plot-ready columns: posterior scatter
//! and contour grids, evidence errors and cost tables.
//!
//! `cargo run --release --example plot_export -- [out_dir]`

use nested_swig::benchmarks::{HierGaussConfig, ModelConfig};
use nested_swig::diag::{emit_plotdata, run_experiment, ExperimentConfig};

fn main() -> nested_swig::Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/example_plot".into()));
    let mut cfg = ExperimentConfig::new(ModelConfig::HierGauss(HierGaussConfig::default()));
    cfg.experiment.repeats = 2;
    cfg.experiment.output_dir = out.join("runs");
    run_experiment(&cfg)?;
    let report = emit_plotdata(&out.join("runs"), &out.join("plotdata"))?;
    for p in &report.written {
        println!("{}", p.display());
    }
    Ok(())
}
