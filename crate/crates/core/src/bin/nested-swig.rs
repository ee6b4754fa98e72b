use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nested_swig::diag::experiment::format_aggregate_table;
use nested_swig::diag::mmd::default_columns;
use nested_swig::diag::{emit_plotdata, load_samples, mmd, run_experiment, scaling_study, ExperimentConfig, MmdOptions};
use nested_swig::engine::ColumnFile;
use nested_swig::{Error, KernelKind};

#[derive(Parser)]
#[command(name = "nested-swig", version, about = "Nested sampling with a Slice-within-Gibbs kernel")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Root seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Repeats per configuration; for `mmd`, subsampling repeats.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replacement kernel (overrides run.kernel; restricts scaling studies).
    #[arg(long, global = true)]
    kernel: Option<KernelKind>,
    /// Worker threads for within-iteration parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Run the base configuration, ignoring any sweep.
    Run { config: PathBuf },
    /// Run every point of the `[sweep]` section.
    Sweep { config: PathBuf },
    /// Cost-scaling study over the `[scaling]` J values.
    Scaling { config: PathBuf },
    /// MMD between the posteriors in two dead-point (or plain columnar) files.
    Mmd {
        file_a: PathBuf,
        file_b: PathBuf,
        /// Comma-separated columns; defaults to the psi columns.
        #[arg(long, value_delimiter = ',')]
        columns: Option<Vec<String>>,
        #[arg(long, default_value_t = 1000)]
        n_sub: usize,
        #[arg(long)]
        standardize: bool,
    },
    /// Plot-ready columns from every run directory below `dir`.
    Plotdata { dir: PathBuf },
}

fn load_config(cli: &Cli, path: &Path) -> nested_swig::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(r) = cli.repeats {
        cfg.experiment.repeats = r;
    }
    if let Some(o) = &cli.out {
        cfg.experiment.output_dir = o.clone();
    }
    if let Some(k) = cli.kernel {
        cfg.run.kernel = k;
        if let Some(sc) = cfg.scaling.as_mut() {
            sc.kernels = vec![k];
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn experiment(cli: &Cli, path: &Path, sweep: bool) -> nested_swig::Result<()> {
    let mut cfg = load_config(cli, path)?;
    if sweep {
        if cfg.sweep.is_none() {
            return Err(Error::Config(format!("{}: no [sweep] section", path.display())));
        }
    } else {
        cfg.sweep = None;
    }
    let report = run_experiment(&cfg)?;
    print!("{}", format_aggregate_table(&report.aggregates));
    for r in &report.runs {
        if let Err(f) = &r.outcome {
            eprintln!("run failed: {}: {}", r.dir.display(), f.message);
        }
    }
    match report.runs.iter().filter_map(|r| r.outcome.as_ref().err()).next() {
        Some(f) if f.nan => Err(Error::NaN { context: f.message.clone() }),
        Some(f) => Err(Error::Config(f.message.clone())),
        None => Ok(()),
    }
}

fn dispatch(cli: &Cli) -> nested_swig::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.verb {
        Verb::Run { config } => experiment(cli, config, false),
        Verb::Sweep { config } => experiment(cli, config, true),
        Verb::Scaling { config } => {
            let cfg = load_config(cli, config)?;
            let report = scaling_study(&cfg)?;
            for s in &report.slopes {
                println!(
                    "{}: slope {:.4} ± {:.4} (95% CI [{:.4}, {:.4}])",
                    s.kernel, s.fit.slope, s.fit.slope_se, s.ci95.0, s.ci95.1
                );
            }
            Ok(())
        }
        Verb::Mmd {
            file_a,
            file_b,
            columns,
            n_sub,
            standardize,
        } => {
            let cols = match columns {
                Some(c) => c.clone(),
                None => default_columns(&ColumnFile::load(file_a)?),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
            let draw = (4 * n_sub).max(1);
            let a = load_samples(file_a, &cols, draw, &mut rng)?;
            let b = load_samples(file_b, &cols, draw, &mut rng)?;
            let opts = MmdOptions {
                n_sub: *n_sub,
                repeats: cli.repeats.unwrap_or(5),
                standardize: *standardize,
            };
            let r = mmd(&a, &b, &opts, &mut rng)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(())
        }
        Verb::Plotdata { dir } => {
            let out = cli.out.clone().unwrap_or_else(|| dir.join("plotdata"));
            let report = emit_plotdata(dir, &out)?;
            for p in &report.written {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Format { .. } => 2,
                Error::NaN { .. } => 3,
                _ => 1,
            })
        }
    }
}
