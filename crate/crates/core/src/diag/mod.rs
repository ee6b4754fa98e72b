//! Experiment orchestration and diagnostics: TOML experiment configs, run
//! sweeps with aggregate tables, cost-scaling fits, the MMD two-sample
//! statistic and plot-data export.

pub mod config;
pub mod experiment;
pub mod mmd;
pub mod plotdata;
pub mod scaling;

pub use config::{split_seed, ExperimentConfig, ExperimentSettings, ScalingSpec, SweepSpec};
pub use experiment::{aggregate, execute_run, load_run_dir, run_experiment, ExperimentReport, PointAggregate};
pub use mmd::{load_samples, mmd, MmdOptions, MmdResult};
pub use plotdata::emit_plotdata;
pub use scaling::{fit_scaling, scaling_study, ScalingReport};
