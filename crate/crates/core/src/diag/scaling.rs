use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::config::{split_seed, ExperimentConfig};
use super::experiment::execute_run;
use crate::engine::KernelKind;
use crate::error::{Error, Result};
use crate::stats::{linear_fit, mean, std_dev, LinearFit};

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub kernel: KernelKind,
    pub n_groups: usize,
    pub repeat: usize,
    pub log_z: f64,
    pub sigma_hat: f64,
    pub analytic_logz: Option<f64>,
    pub full_evals: f64,
    pub n_iterations: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSlope {
    pub kernel: KernelKind,
    pub fit: LinearFit,
    pub ci95: (f64, f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub slopes: Vec<KernelSlope>,
}

impl ScalingReport {
    pub fn slope(&self, kernel: KernelKind) -> Option<&KernelSlope> {
        self.slopes.iter().find(|s| s.kernel == kernel)
    }
}

/// Least-squares slope of `log(evals)` on `log(J)` over `(J, evals)` pairs.
pub fn fit_scaling(points: &[(f64, f64)]) -> KernelSlope {
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&x, &y);
    KernelSlope {
        kernel: KernelKind::Swig,
        ci95: fit.slope_ci(0.95),
        fit,
    }
}

/// Runs each kernel over the configured `J` values and fits cost slopes.
/// Per-run outputs go to `<output_dir>/<kernel>/J=<J>/rep<r>`.
pub fn scaling_study(cfg: &ExperimentConfig) -> Result<ScalingReport> {
    cfg.validate()?;
    let spec = cfg
        .scaling
        .as_ref()
        .ok_or_else(|| Error::Config("scaling study needs a [scaling] section".into()))?;
    let out = &cfg.experiment.output_dir;
    let mut rows = Vec::new();
    for &kernel in &spec.kernels {
        for &j in &spec.n_groups {
            for repeat in 0..cfg.experiment.repeats {
                let mut model = cfg.model.clone();
                model.set_n_groups(j);
                if cfg.experiment.resample_data {
                    if let Some(s) = model.data_seed() {
                        model.set_data_seed(split_seed(s, repeat as u64));
                    }
                }
                let mut run = cfg.run_config();
                run.kernel = kernel;
                run.seed = split_seed(cfg.run.seed, repeat as u64);
                let dir = out.join(kernel.to_string()).join(format!("J={j}")).join(format!("rep{repeat}"));
                let r = execute_run(&model, &run, &dir)?;
                rows.push(ScalingRow {
                    kernel,
                    n_groups: j,
                    repeat,
                    log_z: r.log_z,
                    sigma_hat: r.sigma_hat,
                    analytic_logz: r.analytic_logz,
                    full_evals: r.full_likelihood_equivalents(),
                    n_iterations: r.n_iterations,
                    wall_seconds: r.wall_seconds,
                });
            }
        }
    }
    let slopes = spec
        .kernels
        .iter()
        .map(|&kernel| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.kernel == kernel)
                .map(|r| (r.n_groups as f64, r.full_evals))
                .collect();
            KernelSlope {
                kernel,
                ..fit_scaling(&pts)
            }
        })
        .collect();
    let report = ScalingReport { rows, slopes };
    write_scaling_report(&report, out)?;
    Ok(report)
}

/// Writes `scaling_<kernel>.txt` per-J tables and `scaling.json`.
pub fn write_scaling_report(report: &ScalingReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for s in &report.slopes {
        let mut t = String::from(
            "# J n full_evals_mean full_evals_std log_z_mean log_z_std sigma_hat_mean analytic_logz_mean runtime_mean\n",
        );
        let mut js: Vec<usize> = report.rows.iter().filter(|r| r.kernel == s.kernel).map(|r| r.n_groups).collect();
        js.sort_unstable();
        js.dedup();
        for j in js {
            let rs: Vec<&ScalingRow> = report.rows.iter().filter(|r| r.kernel == s.kernel && r.n_groups == j).collect();
            let col = |f: &dyn Fn(&ScalingRow) -> f64| -> Vec<f64> { rs.iter().map(|r| f(r)).collect() };
            let sd = |v: &[f64]| if v.len() > 1 { std_dev(v) } else { 0.0 };
            let evals = col(&|r| r.full_evals);
            let lz = col(&|r| r.log_z);
            let analytic: Option<Vec<f64>> = rs.iter().map(|r| r.analytic_logz).collect();
            let _ = writeln!(
                t,
                "{j} {} {} {} {} {} {} {} {}",
                rs.len(),
                mean(&evals),
                sd(&evals),
                mean(&lz),
                sd(&lz),
                mean(&col(&|r| r.sigma_hat)),
                analytic.map_or(f64::NAN, |a| mean(&a)),
                mean(&col(&|r| r.wall_seconds)),
            );
        }
        let _ = writeln!(
            t,
            "# slope {} se {} ci95 [{}, {}] r2 {}",
            s.fit.slope, s.fit.slope_se, s.ci95.0, s.ci95.1, s.fit.r_squared
        );
        std::fs::write(dir.join(format!("scaling_{}.txt", s.kernel)), t)?;
    }
    let mut j = serde_json::to_string_pretty(report)?;
    j.push('\n');
    std::fs::write(dir.join("scaling.json"), j)?;
    Ok(())
}
