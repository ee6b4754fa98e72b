use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{split_seed, value_label, value_number, ExperimentConfig};
use crate::benchmarks::ModelConfig;
use crate::engine::{run_nested_sampling, write_run_outputs, RunConfig, RunResult, RunSummary, Timing};
use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};

/// One planned run: a sweep point, a repeat and the seeds derived for it.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub point: usize,
    pub repeat: usize,
    pub dir: PathBuf,
    pub model: ModelConfig,
    pub run: RunConfig,
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub point: usize,
    pub repeat: usize,
    pub dir: PathBuf,
    pub outcome: std::result::Result<(RunSummary, f64), RunFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunFailure {
    pub message: String,
    /// The run aborted on a NaN.
    pub nan: bool,
}

/// Mean/std table row over the successful repeats of one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointAggregate {
    pub label: String,
    pub value: Option<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
    pub log_z_mean: f64,
    pub log_z_std: f64,
    pub sigma_hat_mean: f64,
    pub analytic_logz_mean: Option<f64>,
    pub full_evals_mean: f64,
    pub ess_mean: f64,
    pub runtime_mean: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<PointAggregate>,
}

impl ExperimentReport {
    pub fn n_failed(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Builds the model, runs it and writes `dead.txt`, `summary.json`,
/// `timing.json`, `model.json` and, for synthetic data, `data.txt` into
/// `dir`. Wall time excludes model construction.
pub fn execute_run(model_cfg: &ModelConfig, run: &RunConfig, dir: &Path) -> Result<RunResult> {
    let model = model_cfg.build()?;
    let result = run_nested_sampling(model.as_ref(), run)?;
    write_run_outputs(&result, dir)?;
    let mut mj = serde_json::to_string_pretty(model_cfg)?;
    mj.push('\n');
    std::fs::write(dir.join("model.json"), mj)?;
    if let Some(ds) = model.dataset() {
        ds.save(&dir.join("data.txt"))?;
    }
    Ok(result)
}

/// Every (sweep point, repeat) pair with its directory and seeds.
pub fn plan_runs(cfg: &ExperimentConfig) -> Result<Vec<RunPlan>> {
    let out = &cfg.experiment.output_dir;
    let points: Vec<(PathBuf, ExperimentConfig)> = match &cfg.sweep {
        None => vec![(out.clone(), cfg.clone())],
        Some(sw) => sw
            .values
            .iter()
            .map(|v| {
                let dir = out.join(format!("{}={}", sw.field, value_label(v)));
                cfg.with_override(&sw.field, v.clone()).map(|c| (dir, c))
            })
            .collect::<Result<_>>()?,
    };
    let mut plans = Vec::new();
    for (point, (dir, c)) in points.into_iter().enumerate() {
        for repeat in 0..cfg.experiment.repeats {
            let mut run = c.run_config();
            run.seed = split_seed(c.run.seed, repeat as u64);
            let mut model = c.model.clone();
            if cfg.experiment.resample_data {
                if let Some(s) = model.data_seed() {
                    model.set_data_seed(split_seed(s, repeat as u64));
                }
            }
            plans.push(RunPlan {
                point,
                repeat,
                dir: dir.join(format!("rep{repeat}")),
                model,
                run,
            });
        }
    }
    Ok(plans)
}

fn execute_plan(p: &RunPlan) -> RunRecord {
    let outcome = execute_run(&p.model, &p.run, &p.dir)
        .map(|r| (r.summary(), r.wall_seconds))
        .map_err(|e| {
            let message = e.to_string();
            let _ = std::fs::create_dir_all(&p.dir);
            let _ = std::fs::write(p.dir.join("error.txt"), format!("{message}\n"));
            RunFailure {
                nan: matches!(e, Error::NaN { .. }),
                message,
            }
        });
    RunRecord {
        point: p.point,
        repeat: p.repeat,
        dir: p.dir.clone(),
        outcome,
    }
}

/// Aggregates `(summary, wall seconds)` pairs into one table row.
pub fn aggregate(label: &str, value: Option<f64>, ok: &[(RunSummary, f64)], n_failed: usize) -> PointAggregate {
    let pick = |f: &dyn Fn(&(RunSummary, f64)) -> f64| -> Vec<f64> { ok.iter().map(f).collect() };
    let log_z = pick(&|r| r.0.log_z);
    let analytic: Option<Vec<f64>> = ok.iter().map(|r| r.0.analytic_logz).collect();
    let sd = if log_z.len() > 1 { std_dev(&log_z) } else { 0.0 };
    PointAggregate {
        label: label.to_string(),
        value,
        n_ok: ok.len(),
        n_failed,
        log_z_mean: mean(&log_z),
        log_z_std: sd,
        sigma_hat_mean: mean(&pick(&|r| r.0.sigma_hat)),
        analytic_logz_mean: analytic.filter(|a| !a.is_empty()).map(|a| mean(&a)),
        full_evals_mean: mean(&pick(&|r| r.0.n_full_likelihood_equivalents)),
        ess_mean: mean(&pick(&|r| r.0.ess)),
        runtime_mean: mean(&pick(&|r| r.1)),
    }
}

pub const AGGREGATE_COLUMNS: &str =
    "point value n_ok n_failed log_z_mean log_z_std sigma_hat_mean analytic_logz_mean full_evals_mean ess_mean runtime_mean";

pub fn format_aggregate_table(rows: &[PointAggregate]) -> String {
    let mut s = format!("# {AGGREGATE_COLUMNS}\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i} {} {} {} {} {} {} {} {} {} {}",
            r.value.unwrap_or(f64::NAN),
            r.n_ok,
            r.n_failed,
            r.log_z_mean,
            r.log_z_std,
            r.sigma_hat_mean,
            r.analytic_logz_mean.unwrap_or(f64::NAN),
            r.full_evals_mean,
            r.ess_mean,
            r.runtime_mean
        );
    }
    s
}

/// Reads `summary.json` and `timing.json` from a run directory.
pub fn load_run_dir(dir: &Path) -> Result<(RunSummary, f64)> {
    let s: RunSummary = serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json"))?)?;
    let t: Timing = serde_json::from_str(&std::fs::read_to_string(dir.join("timing.json"))?)?;
    Ok((s, t.wall_seconds))
}

/// Runs every sweep point and repeat, writes the per-run outputs and
/// `aggregate.txt` / `aggregate.json` into the output directory. Failed runs
/// leave an `error.txt` and are excluded from the aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let plans = plan_runs(cfg)?;
    let runs: Vec<RunRecord> = if cfg.experiment.parallel_runs {
        plans.par_iter().map(execute_plan).collect()
    } else {
        plans.iter().map(execute_plan).collect()
    };
    let n_points = plans.iter().map(|p| p.point + 1).max().unwrap_or(0);
    let mut aggregates = Vec::with_capacity(n_points);
    for point in 0..n_points {
        let (label, value) = match &cfg.sweep {
            Some(sw) => (
                format!("{}={}", sw.field, value_label(&sw.values[point])),
                value_number(&sw.values[point]),
            ),
            None => ("base".to_string(), None),
        };
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.point == point).collect();
        let ok: Vec<(RunSummary, f64)> = mine.iter().filter_map(|r| r.outcome.clone().ok()).collect();
        aggregates.push(aggregate(&label, value, &ok, mine.len() - ok.len()));
    }
    let out = &cfg.experiment.output_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("aggregate.txt"), format_aggregate_table(&aggregates))?;
    let mut j = serde_json::to_string_pretty(&aggregates)?;
    j.push('\n');
    std::fs::write(out.join("aggregate.json"), j)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(ExperimentReport { runs, aggregates })
}

