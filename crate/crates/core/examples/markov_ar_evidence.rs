//! Markov SwiG and the joint-space baseline on a Gaussian AR(1) chain, whose
//! evidence is a multivariate normal density available in closed form.
//!
//! `cargo run --release --example markov_ar_evidence -- [T] [seeds]`

use nalgebra::{DMatrix, DVector};
use nested_swig::benchmarks::ArGauss;
use nested_swig::{run_nested_sampling, KernelKind, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn exact_logz(m: &ArGauss) -> f64 {
    let t = m.y.len();
    let v0 = m.sigma * m.sigma / (1.0 - m.beta * m.beta);
    let c = DMatrix::from_fn(t, t, |i, j| {
        v0 * m.beta.powi((i as i32 - j as i32).abs()) + if i == j { m.obs_sd * m.obs_sd } else { 0.0 }
    });
    let r = DVector::from_iterator(t, m.y.iter().map(|v| v - m.mu));
    let ch = c.cholesky().expect("covariance is positive definite");
    let z = ch.l().solve_lower_triangular(&r).expect("triangular solve");
    let logdet: f64 = 2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (t as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + z.norm_squared())
}

fn main() -> nested_swig::Result<()> {
    let mut args = std::env::args().skip(1);
    let t: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x = 0.0f64;
    let y: Vec<f64> = (0..t)
        .map(|_| {
            let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            x = 0.9 * x + 0.5 * a;
            x + 0.7 * b
        })
        .collect();
    let model = ArGauss {
        mu: 0.0,
        beta: 0.9,
        sigma: 0.5,
        obs_sd: 0.7,
        y,
    };
    let truth = exact_logz(&model);
    println!("exact log Z = {truth:.4}");
    for kernel in [KernelKind::Swig, KernelKind::Nss] {
        for seed in 0..seeds {
            let cfg = RunConfig {
                seed,
                kernel,
                ..Default::default()
            };
            let r = run_nested_sampling(&model, &cfg)?;
            println!(
                "{kernel} seed {seed}: {:.4} ± {:.4} (z = {:+.2}), {:.0} full evaluations",
                r.log_z,
                r.sigma_hat,
                (r.log_z - truth) / r.sigma_hat,
                r.full_likelihood_equivalents()
            );
        }
    }
    Ok(())
}
