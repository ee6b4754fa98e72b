//! Compares the hyperparameter posteriors of two runs with MMD, against a
//! control built by shifting one of them.
//!
//! `cargo run --release --example posterior_mmd -- [out_dir]`

use std::path::PathBuf;

use nested_swig::benchmarks::{HierGaussConfig, ModelConfig};
use nested_swig::diag::{execute_run, load_samples, mmd, MmdOptions};
use nested_swig::{KernelKind, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> nested_swig::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/example_mmd".into()));
    let model = ModelConfig::HierGauss(HierGaussConfig::default());
    let mut files = Vec::new();
    for kernel in [KernelKind::Swig, KernelKind::Nss] {
        let dir = out.join(kernel.to_string());
        execute_run(&model, &RunConfig { kernel, seed: 3, ..Default::default() }, &dir)?;
        files.push(dir.join("dead.txt"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cols = vec!["psi_0".to_string()];
    let a = load_samples(&files[0], &cols, 4000, &mut rng)?;
    let b = load_samples(&files[1], &cols, 4000, &mut rng)?;
    let shifted: Vec<Vec<f64>> = a.iter().map(|p| vec![p[0] + 0.5]).collect();
    let opts = MmdOptions::default();
    let between = mmd(&a, &b, &opts, &mut rng)?;
    let control = mmd(&a, &shifted, &opts, &mut rng)?;
    println!("SwiG vs NSS        {:.3e} ± {:.1e}", between.value, between.std_over_repeats);
    println!("SwiG vs shifted    {:.3e} ± {:.1e}", control.value, control.std_over_repeats);
    Ok(())
}
