//! Maximum mean discrepancy between two point sets.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::ColumnFile;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdOptions {
    /// Points drawn without replacement from each set per repeat.
    pub n_sub: usize,
    pub repeats: usize,
    /// Scale every coordinate by the pooled mean and standard deviation of
    /// both sets before computing distances.
    pub standardize: bool,
}

impl Default for MmdOptions {
    fn default() -> Self {
        Self {
            n_sub: 1000,
            repeats: 5,
            standardize: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdResult {
    /// Mean over repeats of the biased squared MMD, clamped at zero.
    pub value: f64,
    /// Mean over repeats of the kernel bandwidth.
    pub bandwidth: f64,
    pub n_subsample: usize,
    pub n_repeats: usize,
    pub std_over_repeats: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel whose bandwidth
/// is the mean pairwise distance over the combined sample. Returns the
/// value (unclamped) and the bandwidth.
pub fn mmd_v_statistic(x: &[&[f64]], y: &[&[f64]]) -> (f64, f64) {
    let all: Vec<&[f64]> = x.iter().chain(y).copied().collect();
    let n = all.len();
    let mut d2 = vec![0.0; n * n];
    let mut dist_sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(all[i], all[j]);
            d2[i * n + j] = d;
            d2[j * n + i] = d;
            dist_sum += d.sqrt();
        }
    }
    let pairs = (n * (n - 1) / 2).max(1) as f64;
    let h = dist_sum / pairs;
    let gamma = if h > 0.0 { 1.0 / (2.0 * h * h) } else { 0.0 };
    let nx = x.len();
    let block = |r0: usize, r1: usize, c0: usize, c1: usize| -> f64 {
        let mut s = 0.0;
        for i in r0..r1 {
            for j in c0..c1 {
                s += (-gamma * d2[i * n + j]).exp();
            }
        }
        s / ((r1 - r0) * (c1 - c0)) as f64
    };
    let kxx = block(0, nx, 0, nx);
    let kyy = block(nx, n, nx, n);
    let kxy = block(0, nx, nx, n);
    (kxx + kyy - 2.0 * kxy, h)
}

fn standardized(a: &[Vec<f64>], b: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = a[0].len();
    let n = (a.len() + b.len()) as f64;
    let mut mu = vec![0.0; d];
    for p in a.iter().chain(b) {
        for (m, v) in mu.iter_mut().zip(p) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; d];
    for p in a.iter().chain(b) {
        for ((s, v), m) in var.iter_mut().zip(p).zip(&mu) {
            *s += (v - m) * (v - m) / (n - 1.0).max(1.0);
        }
    }
    let sd: Vec<f64> = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let tr = |set: &[Vec<f64>]| -> Vec<Vec<f64>> {
        set.iter()
            .map(|p| p.iter().zip(&mu).zip(&sd).map(|((v, m), s)| (v - m) / s).collect())
            .collect()
    };
    (tr(a), tr(b))
}

/// Subsampled MMD averaged over repeats.
pub fn mmd<R: Rng + ?Sized>(a: &[Vec<f64>], b: &[Vec<f64>], opts: &MmdOptions, rng: &mut R) -> Result<MmdResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("MMD needs two non-empty sample sets".into()));
    }
    let d = a[0].len();
    if let Some(p) = a.iter().chain(b).find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    if opts.repeats == 0 || opts.n_sub == 0 {
        return Err(Error::Config("MMD needs n_sub >= 1 and repeats >= 1".into()));
    }
    let (sa, sb);
    let (a, b) = if opts.standardize {
        (sa, sb) = standardized(a, b);
        (&sa[..], &sb[..])
    } else {
        (a, b)
    };
    let na = opts.n_sub.min(a.len());
    let nb = opts.n_sub.min(b.len());
    let mut values = Vec::with_capacity(opts.repeats);
    let mut hs = Vec::with_capacity(opts.repeats);
    for _ in 0..opts.repeats {
        let x: Vec<&[f64]> = sample(rng, a.len(), na).iter().map(|i| a[i].as_slice()).collect();
        let y: Vec<&[f64]> = sample(rng, b.len(), nb).iter().map(|i| b[i].as_slice()).collect();
        let (v, h) = mmd_v_statistic(&x, &y);
        values.push(v.max(0.0));
        hs.push(h);
    }
    let n = values.len() as f64;
    let value = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(MmdResult {
        value,
        bandwidth: hs.iter().sum::<f64>() / n,
        n_subsample: na.min(nb),
        n_repeats: opts.repeats,
        std_over_repeats: std,
    })
}

/// Columns compared by default: every `psi_*` column, or all columns when
/// there are none.
pub fn default_columns(file: &ColumnFile) -> Vec<String> {
    let psi: Vec<String> = file.columns.iter().filter(|c| c.starts_with("psi_")).cloned().collect();
    if psi.is_empty() {
        file.columns.clone()
    } else {
        psi
    }
}

/// Equally weighted posterior samples of `columns` from a columnar file.
///
/// Files with a `log_weight` column (dead-point files) are resampled with
/// replacement in proportion to the weights, drawing `n` points; rows with
/// missing parameters are skipped. Other files are returned row by row.
pub fn load_samples<R: Rng + ?Sized>(path: &Path, columns: &[String], n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let file = ColumnFile::load(path)?;
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            file.column_index(c).ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                reason: format!("no column '{c}'"),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<&Vec<f64>> = file
        .rows
        .iter()
        .filter(|r| idx.iter().all(|&i| r[i].is_finite()))
        .collect();
    let pick = |r: &Vec<f64>| idx.iter().map(|&i| r[i]).collect::<Vec<f64>>();
    let Some(wi) = file.column_index("log_weight") else {
        return Ok(rows.into_iter().map(pick).collect());
    };
    let lw: Vec<f64> = rows.iter().map(|r| r[wi]).collect();
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "no finite weights on rows with parameters".into(),
        });
    }
    let mut cdf = Vec::with_capacity(lw.len());
    let mut acc = 0.0;
    for w in &lw {
        acc += (w - max).exp();
        cdf.push(acc);
    }
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let k = cdf.partition_point(|&c| c <= u).min(rows.len() - 1);
            pick(rows[k])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                vec![z + shift]
            })
            .collect()
    }

    #[test]
    fn identical_sets_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = normals(300, 0.0, &mut rng);
        let x: Vec<&[f64]> = a.iter().map(|p| p.as_slice()).collect();
        let (v, _) = mmd_v_statistic(&x, &x);
        assert!(v.abs() <= 1e-10);
        let r = mmd(&a, &a, &MmdOptions { n_sub: 300, ..Default::default() }, &mut rng).unwrap();
        assert!(r.value <= 1e-10);
    }

    #[test]
    fn separated_gaussians_dominate_matched_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = normals(1000, 0.0, &mut rng);
        let b = normals(1000, 0.0, &mut rng);
        let c = normals(1000, 5.0, &mut rng);
        let o = MmdOptions::default();
        let same = mmd(&a, &b, &o, &mut rng).unwrap();
        let far = mmd(&a, &c, &o, &mut rng).unwrap();
        assert!(far.value >= 10.0 * same.value, "{} vs {}", far.value, same.value);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut g = ChaCha8Rng::seed_from_u64(3);
        let a = normals(500, 0.0, &mut g);
        let b = normals(500, 1.0, &mut g);
        let o = MmdOptions { n_sub: 200, ..Default::default() };
        let r1 = mmd(&a, &b, &o, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let r2 = mmd(&a, &b, &o, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn monotone_in_separation() {
        let mut g = ChaCha8Rng::seed_from_u64(4);
        let base = normals(1000, 0.0, &mut g);
        let o = MmdOptions::default();
        let r: Vec<MmdResult> = [0.0, 1.0, 5.0]
            .iter()
            .map(|&s| {
                let other = normals(1000, s, &mut g);
                mmd(&base, &other, &o, &mut g).unwrap()
            })
            .collect();
        for w in r.windows(2) {
            let gap = w[1].value - w[0].value;
            let noise = w[0].std_over_repeats.max(w[1].std_over_repeats);
            assert!(gap >= 3.0 * noise, "{gap} vs {noise}");
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut g = ChaCha8Rng::seed_from_u64(5);
        let a = vec![vec![0.0, 1.0]];
        let b = vec![vec![0.0]];
        assert!(matches!(
            mmd(&a, &b, &MmdOptions::default(), &mut g),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(mmd(&[], &b, &MmdOptions::default(), &mut g).is_err());
    }

    #[test]
    fn standardization_is_scale_invariant() {
        let mut g = ChaCha8Rng::seed_from_u64(6);
        let a = normals(400, 0.0, &mut g);
        let b = normals(400, 0.7, &mut g);
        let scale = |s: &[Vec<f64>]| s.iter().map(|p| vec![p[0] * 1000.0 + 3.0]).collect::<Vec<_>>();
        let o = MmdOptions { n_sub: 400, repeats: 1, standardize: true };
        let r1 = mmd(&a, &b, &o, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let r2 = mmd(&scale(&a), &scale(&b), &o, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((r1.value - r2.value).abs() < 1e-9);
    }

    #[test]
    fn weighted_resampling_follows_weights() {
        let dir = std::env::temp_dir().join(format!("mmd_load_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("dead.txt");
        let l3 = (3.0f64).ln();
        std::fs::write(
            &p,
            format!("# iteration log_like log_x log_weight psi_0\n0 0 0 -inf 5\n1 0 0 0 1\n2 0 0 {l3} 2\n3 0 0 0 nan\n"),
        )
        .unwrap();
        let mut g = ChaCha8Rng::seed_from_u64(7);
        let s = load_samples(&p, &["psi_0".to_string()], 40_000, &mut g).unwrap();
        let ones = s.iter().filter(|v| v[0] == 1.0).count() as f64 / s.len() as f64;
        assert!((ones - 0.25).abs() < 0.01, "{ones}");
        assert!(s.iter().all(|v| v[0] == 1.0 || v[0] == 2.0));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
