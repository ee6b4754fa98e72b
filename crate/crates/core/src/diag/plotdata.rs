//! Plot-ready columnar exports from completed run directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::load_run_dir;
use crate::benchmarks::{Funnel, HierGauss, ModelConfig};
use crate::engine::{ColumnFile, RunSummary};
use crate::error::Result;
use crate::stats::{mean, std_dev};

/// Finds run directories (those holding a `summary.json`) below `root`,
/// in sorted order.
pub fn find_run_dirs(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        if d.join("summary.json").is_file() {
            out.push(d.clone());
        }
        if let Ok(rd) = std::fs::read_dir(&d) {
            for e in rd.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                }
            }
        }
    }
    out.sort();
    out
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PlotdataReport {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<(PathBuf, String)>,
}

struct Loaded {
    dir: PathBuf,
    summary: RunSummary,
    seconds: f64,
}

fn sd(v: &[f64]) -> f64 {
    if v.len() > 1 {
        std_dev(v)
    } else {
        0.0
    }
}

/// Analytic mean and covariance of `(psi, theta_0)` under the Gaussian
/// model's posterior: `[m_psi, m_theta, v_psi, v_theta, cov]`.
pub fn hg_psi_theta0_moments(model: &HierGauss) -> [f64; 5] {
    let (mp, vp) = model.posterior_psi();
    let (a0, s2) = model.conditional_theta(0, 0.0);
    let (a1, _) = model.conditional_theta(0, 1.0);
    let b = a1 - a0;
    [mp, a0 + b * mp, vp, s2 + b * b * vp, b * vp]
}

fn bivariate_normal_logpdf(m: &[f64; 5], x: f64, y: f64) -> f64 {
    let det = m[2] * m[3] - m[4] * m[4];
    let (dx, dy) = (x - m[0], y - m[1]);
    let q = (m[3] * dx * dx - 2.0 * m[4] * dx * dy + m[2] * dy * dy) / det;
    -0.5 * q - (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln()
}

/// Posterior log-density of `(psi, theta_0)` on a regular grid. Returns the
/// file body (`psi theta0 log_density`) or `None` for models without one.
pub fn contour_grid(model: &ModelConfig, n: usize) -> Result<Option<String>> {
    let (f, (p0, p1), (t0, t1)): (Box<dyn Fn(f64, f64) -> f64>, _, _) = match model {
        ModelConfig::HierGauss(c) => {
            let m = hg_psi_theta0_moments(&HierGauss::new(c.clone())?);
            let (sp, st) = (m[2].sqrt(), m[3].sqrt());
            (
                Box::new(move |x, y| bivariate_normal_logpdf(&m, x, y)),
                (m[0] - 4.0 * sp, m[0] + 4.0 * sp),
                (m[1] - 4.0 * st, m[1] + 4.0 * st),
            )
        }
        ModelConfig::Funnel(c) => {
            let fun = Funnel::new(c.clone())?;
            let s = c.sigma_psi_sq.sqrt();
            let b = c.theta_bound.min(4.0 * (1.5 * s).exp());
            (Box::new(move |x, y| fun.log_posterior_psi_theta0(x, y)), (-3.0 * s, 2.0 * s), (-b, b))
        }
        ModelConfig::Sv(_) => return Ok(None),
    };
    let mut s = String::from("# psi theta0 log_density\n");
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    for i in 0..n {
        for k in 0..n {
            let (x, y) = (step(p0, p1, i), step(t0, t1, k));
            let _ = writeln!(s, "{x} {y} {}", f(x, y));
        }
    }
    Ok(Some(s))
}

/// `psi theta0 weight` rows from a dead-point file, skipping unstored rows.
pub fn scatter_rows(dead: &ColumnFile) -> Option<String> {
    let (pi, ti, wi) = (
        dead.column_index("psi_0")?,
        dead.column_index("theta_0").or_else(|| dead.column_index("theta_0_0"))?,
        dead.column_index("log_weight")?,
    );
    let mut s = String::from("# psi theta0 weight\n");
    for r in &dead.rows {
        if r[pi].is_finite() && r[ti].is_finite() {
            let _ = writeln!(s, "{} {} {}", r[pi], r[ti], r[wi].exp());
        }
    }
    Some(s)
}

/// Writes per-figure columnar files for all runs under `root` into `out`:
///
/// - `evals_vs_J_<model>_<kernel>.txt`: `J mean_evals std_evals n`
/// - `evidence_error_<model>_<kernel>.txt`: `J mean_error std_error mean_sigma_hat n`
/// - `runtime_vs_J_<model>_<kernel>.txt`: `J mean_seconds std_seconds n`
/// - `scatter_<model>_<kernel>_J<J>.txt`: `psi theta0 weight` from the first
///   run of each group
/// - `contour_<model>_J<J>.txt`: analytic `(psi, theta0)` log-density grid
///
/// Unreadable runs are skipped with a warning on stderr.
pub fn emit_plotdata(root: &Path, out: &Path) -> Result<PlotdataReport> {
    let mut report = PlotdataReport::default();
    let mut loaded = Vec::new();
    for dir in find_run_dirs(root) {
        match load_run_dir(&dir) {
            Ok((summary, seconds)) => loaded.push(Loaded { dir, summary, seconds }),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", dir.display());
                report.skipped.push((dir, e.to_string()));
            }
        }
    }
    std::fs::create_dir_all(out)?;
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, Vec<&Loaded>>> = BTreeMap::new();
    for l in &loaded {
        groups
            .entry((l.summary.model.clone(), l.summary.kernel.to_string()))
            .or_default()
            .entry(l.summary.n_groups)
            .or_default()
            .push(l);
    }
    let write = |name: String, body: String, report: &mut PlotdataReport| -> Result<()> {
        let p = out.join(name);
        std::fs::write(&p, body)?;
        report.written.push(p);
        Ok(())
    };
    let mut contours_done = std::collections::BTreeSet::new();
    for ((model, kernel), by_j) in &groups {
        let mut evals = String::from("# J mean_evals std_evals n\n");
        let mut runtime = String::from("# J mean_seconds std_seconds n\n");
        let mut error = String::from("# J mean_error std_error mean_sigma_hat n\n");
        let mut any_analytic = false;
        for (j, runs) in by_j {
            let ev: Vec<f64> = runs.iter().map(|l| l.summary.n_full_likelihood_equivalents).collect();
            let rt: Vec<f64> = runs.iter().map(|l| l.seconds).collect();
            let _ = writeln!(evals, "{j} {} {} {}", mean(&ev), sd(&ev), runs.len());
            let _ = writeln!(runtime, "{j} {} {} {}", mean(&rt), sd(&rt), runs.len());
            let errs: Vec<f64> = runs
                .iter()
                .filter_map(|l| l.summary.analytic_logz.map(|a| l.summary.log_z - a))
                .collect();
            if !errs.is_empty() {
                any_analytic = true;
                let sig: Vec<f64> = runs.iter().map(|l| l.summary.sigma_hat).collect();
                let _ = writeln!(error, "{j} {} {} {} {}", mean(&errs), sd(&errs), mean(&sig), errs.len());
            }
            let first = runs[0];
            match ColumnFile::load(&first.dir.join("dead.txt")) {
                Ok(dead) => {
                    if let Some(body) = scatter_rows(&dead) {
                        write(format!("scatter_{model}_{kernel}_J{j}.txt"), body, &mut report)?;
                    }
                }
                Err(e) => {
                    eprintln!("warning: no scatter for {}: {e}", first.dir.display());
                    report.skipped.push((first.dir.clone(), e.to_string()));
                }
            }
            if contours_done.insert((model.clone(), *j)) {
                let cfg: Option<ModelConfig> = std::fs::read_to_string(first.dir.join("model.json"))
                    .ok()
                    .and_then(|s| serde_json::from_str(&s).ok());
                if let Some(cfg) = cfg {
                    if let Some(body) = contour_grid(&cfg, 101)? {
                        write(format!("contour_{model}_J{j}.txt"), body, &mut report)?;
                    }
                }
            }
        }
        write(format!("evals_vs_J_{model}_{kernel}.txt"), evals, &mut report)?;
        write(format!("runtime_vs_J_{model}_{kernel}.txt"), runtime, &mut report)?;
        if any_analytic {
            write(format!("evidence_error_{model}_{kernel}.txt"), error, &mut report)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{FunnelConfig, HierGaussConfig};
    use crate::model::Model;

    fn grid_mass(body: &str) -> f64 {
        let rows: Vec<[f64; 3]> = body
            .lines()
            .skip(1)
            .map(|l| {
                let v: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        let n = (rows.len() as f64).sqrt() as usize;
        let dx = rows[n][0] - rows[0][0];
        let dy = rows[1][1] - rows[0][1];
        rows.iter().map(|r| r[2].exp()).sum::<f64>() * dx * dy
    }

    #[test]
    fn gaussian_contour_is_normalised_and_matches_moments() {
        let cfg = HierGaussConfig::default();
        let body = contour_grid(&ModelConfig::HierGauss(cfg.clone()), 201).unwrap().unwrap();
        assert!((grid_mass(&body) - 1.0).abs() < 1e-3);
        // theta_0 | psi regression slope against the conditional formula.
        let m = hg_psi_theta0_moments(&HierGauss::new(cfg.clone()).unwrap());
        let s2 = 1.0 / (1.0 / 4.0 + 1.0);
        assert!((m[4] / m[2] - s2 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn funnel_contour_matches_closed_form() {
        let cfg = FunnelConfig::default();
        let body = contour_grid(&ModelConfig::Funnel(cfg.clone()), 51).unwrap().unwrap();
        let f = Funnel::new(cfg).unwrap();
        let rows: Vec<Vec<f64>> = body
            .lines()
            .skip(1)
            .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 51 * 51);
        for r in rows.iter().step_by(97) {
            assert_eq!(r[2], f.log_posterior_psi_theta0(r[0], r[1]));
        }
        // At psi = 0 the density is the evidence-normalised product of the
        // hyperprior, one Gaussian and nine near-complete uniform integrals.
        let j = 10.0;
        let direct = -0.5 * (2.0 * std::f64::consts::PI * 9.0).ln() - j * 200f64.ln()
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - f.analytic_logz().unwrap();
        assert!((f.log_posterior_psi_theta0(0.0, 0.0) - direct).abs() < 1e-9);
    }

    #[test]
    fn scatter_has_schema() {
        let cf = ColumnFile {
            columns: ["iteration", "log_like", "log_x", "log_weight", "psi_0", "theta_0", "theta_1"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            rows: vec![vec![0.0, -1.0, -0.1, -2.0, 0.5, 0.1, 0.2], vec![1.0, -0.5, -0.2, -1.0, f64::NAN, f64::NAN, f64::NAN]],
        };
        let s = scatter_rows(&cf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("# psi theta0 weight"));
        assert_eq!(lines.count(), 1);
    }
}
