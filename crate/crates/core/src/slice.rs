//! Constrained slice sampling: univariate stepping-out and shrinkage,
//! hit-and-run moves along covariance-shaped directions, and the
//! block-diagonal covariance those directions are drawn from.
//!
//! Every move samples the density `exp(logf)` restricted to the region where
//! a hard constraint holds. `logf` is always tested first; the constraint is
//! only evaluated for points already above the slice level, so each
//! constraint evaluation corresponds to a genuine candidate.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelDims;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SliceParams {
    /// Total number of bracket expansions, split at random between the two
    /// sides, so neither side expands more than this.
    pub max_stepout: usize,
    pub max_shrink: usize,
}

impl Default for SliceParams {
    fn default() -> Self {
        Self {
            max_stepout: 10,
            max_shrink: 100,
        }
    }
}

/// Outcome of one slice move.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SliceStep {
    /// `logf` at the returned point.
    pub logf: f64,
    pub constraint_evals: u32,
    pub stepouts: u32,
    pub shrinks: u32,
    /// Shrinkage ran out; the starting point was returned.
    pub stalled: bool,
}

/// The density to sample and the hard constraint restricting it.
pub struct SliceTarget<F, C> {
    pub logf: F,
    pub constraint: C,
    /// Initial bracket width along the line.
    pub width0: f64,
}

pub(crate) struct Probe {
    pub inside: bool,
    pub checked: bool,
    pub logf: f64,
}

/// Slice move along a line parameterised by `t`, starting at `t = 0` with
/// log-density `lp0`. Returns the accepted offset (0 on stall).
pub(crate) fn slice_line<R, P>(
    lp0: f64,
    width: f64,
    mut probe: P,
    params: &SliceParams,
    rng: &mut R,
) -> (f64, SliceStep)
where
    R: Rng + ?Sized,
    P: FnMut(f64, f64) -> Probe,
{
    let e: f64 = rng.sample(Exp1);
    let level = lp0 - e;
    let mut step = SliceStep {
        logf: lp0,
        ..SliceStep::default()
    };
    let mut call = |t: f64, step: &mut SliceStep| {
        let p = probe(t, level);
        if p.checked {
            step.constraint_evals += 1;
        }
        p
    };

    let u: f64 = rng.random();
    let mut lo = -width * u;
    let mut hi = lo + width;
    let v: f64 = rng.random();
    let budget = params.max_stepout;
    let mut left = (((budget + 1) as f64 * v).floor() as usize).min(budget);
    let mut right = budget - left;
    while left > 0 && call(lo, &mut step).inside {
        lo -= width;
        left -= 1;
        step.stepouts += 1;
    }
    while right > 0 && call(hi, &mut step).inside {
        hi += width;
        right -= 1;
        step.stepouts += 1;
    }
    debug_assert!(step.stepouts as usize <= budget);

    for _ in 0..params.max_shrink {
        let t = lo + rng.random::<f64>() * (hi - lo);
        let p = call(t, &mut step);
        if p.inside {
            step.logf = p.logf;
            return (t, step);
        }
        if t < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        step.shrinks += 1;
    }
    step.stalled = true;
    (0.0, step)
}

/// Univariate constrained slice move from `x0`, where `lp0 = logf(x0)`.
///
/// `x0` must satisfy the constraint and have finite `lp0`.
pub fn slice_axis<R, F, C>(
    x0: f64,
    lp0: f64,
    target: &mut SliceTarget<F, C>,
    params: &SliceParams,
    rng: &mut R,
) -> (f64, SliceStep)
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
    C: FnMut(f64) -> bool,
{
    let width = target.width0;
    let (t, step) = slice_line(
        lp0,
        width,
        |t, level| {
            let x = x0 + t;
            let lf = (target.logf)(x);
            if !(lf > level) {
                return Probe {
                    inside: false,
                    checked: false,
                    logf: lf,
                };
            }
            Probe {
                inside: (target.constraint)(x),
                checked: true,
                logf: lf,
            }
        },
        params,
        rng,
    );
    (x0 + t, step)
}

/// Hit-and-run slice move along `x + s * dir`, updating `x` in place.
///
/// The bracket width is one unit of `s`, i.e. `‖dir‖` in parameter units.
/// `target.width0` is ignored here; scale `dir` instead. `scratch` is resized
/// as needed and holds candidate points during the move.
pub fn slice_direction<R, F, C>(
    x: &mut [f64],
    lp0: f64,
    dir: &[f64],
    target: &mut SliceTarget<F, C>,
    params: &SliceParams,
    scratch: &mut Vec<f64>,
    rng: &mut R,
) -> SliceStep
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
    C: FnMut(&[f64]) -> bool,
{
    debug_assert_eq!(x.len(), dir.len());
    scratch.clear();
    scratch.resize(x.len(), 0.0);
    let x0: &[f64] = x;
    let (t, step) = slice_line(
        lp0,
        1.0,
        |t, level| {
            for ((s, &a), &d) in scratch.iter_mut().zip(x0).zip(dir) {
                *s = a + t * d;
            }
            let lf = (target.logf)(scratch);
            if !(lf > level) {
                return Probe {
                    inside: false,
                    checked: false,
                    logf: lf,
                };
            }
            Probe {
                inside: (target.constraint)(scratch),
                checked: true,
                logf: lf,
            }
        },
        params,
        rng,
    );
    if !step.stalled {
        for (a, &d) in x.iter_mut().zip(dir) {
            *a += t * d;
        }
    }
    step
}

/// One symmetric positive-definite covariance block with its Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct CovBlock {
    dim: usize,
    cov: Vec<f64>,
    chol: Vec<f64>,
    jitter: f64,
}

impl CovBlock {
    /// Adds `jitter * I` with `jitter = max(1e-8 * trace / dim, 1e-12)` and
    /// factorises.
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cov.ncols(),
            });
        }
        let jitter = (1e-8 * cov.trace() / dim as f64).max(1e-12);
        let mut m = cov;
        for i in 0..dim {
            m[(i, i)] += jitter;
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .unpack();
        Ok(Self {
            dim,
            cov: m.transpose().as_slice().to_vec(),
            chol: chol.transpose().as_slice().to_vec(),
            jitter,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Covariance entry, jitter included.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim + j]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.cov)
    }

    fn fill_direction<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> f64 {
        let d = self.dim;
        if d == 1 {
            let z: f64 = rng.sample(StandardNormal);
            out[0] = self.chol[0] * z.signum();
            return 1.0;
        }
        let mut z = [0.0f64; 8];
        let mut heap;
        let z: &mut [f64] = if d <= 8 {
            &mut z[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut norm2 = 0.0;
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
            norm2 += *zi * *zi;
        }
        let inv = 1.0 / norm2.sqrt();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.chol[i * d..i * d + i + 1];
            *o = row.iter().zip(z.iter()).map(|(l, z)| l * z).sum::<f64>() * inv;
        }
        norm2
    }
}

/// `L z / ‖z‖` for `z ~ N(0, I)` and `L` the block's Cholesky factor.
/// The move width is the norm of the result.
pub fn draw_direction<R: Rng + ?Sized>(block: &CovBlock, rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(out.len(), block.dim);
    block.fill_direction(rng, out);
}

#[derive(Clone, Debug, PartialEq)]
pub enum LocalCov {
    /// One block shared by every group.
    Pooled(CovBlock),
    PerGroup(Vec<CovBlock>),
}

/// Block-diagonal covariance: one hyperparameter block and one block per
/// local group (possibly shared). Cross-block entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCovariance {
    dims: ModelDims,
    psi: Option<CovBlock>,
    local: LocalCov,
}

impl BlockCovariance {
    pub fn new(dims: ModelDims, psi: Option<CovBlock>, local: LocalCov) -> Result<Self> {
        let psi_dim = psi.as_ref().map_or(0, CovBlock::dim);
        if psi_dim != dims.d_psi {
            return Err(Error::DimensionMismatch {
                expected: dims.d_psi,
                got: psi_dim,
            });
        }
        let locals: &[CovBlock] = match &local {
            LocalCov::Pooled(b) => std::slice::from_ref(b),
            LocalCov::PerGroup(v) => {
                if v.len() != dims.n_groups {
                    return Err(Error::DimensionMismatch {
                        expected: dims.n_groups,
                        got: v.len(),
                    });
                }
                v
            }
        };
        if let Some(b) = locals.iter().find(|b| b.dim() != dims.d_theta) {
            return Err(Error::DimensionMismatch {
                expected: dims.d_theta,
                got: b.dim(),
            });
        }
        Ok(Self { dims, psi, local })
    }

    /// Identity blocks everywhere.
    pub fn identity(dims: ModelDims) -> Self {
        Self {
            dims,
            psi: (dims.d_psi > 0).then(|| CovBlock::identity(dims.d_psi)),
            local: LocalCov::Pooled(CovBlock::identity(dims.d_theta)),
        }
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn psi_block(&self) -> Option<&CovBlock> {
        self.psi.as_ref()
    }

    pub fn local_block(&self, j: usize) -> &CovBlock {
        match &self.local {
            LocalCov::Pooled(b) => b,
            LocalCov::PerGroup(v) => &v[j],
        }
    }

    pub fn is_pooled(&self) -> bool {
        matches!(self.local, LocalCov::Pooled(_))
    }

    /// Entry `(i, j)` of the full `d_total × d_total` matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let block_of = |i: usize| {
            if i < self.dims.d_psi {
                (None, i)
            } else {
                let r = i - self.dims.d_psi;
                (Some(r / self.dims.d_theta), r % self.dims.d_theta)
            }
        };
        match (block_of(i), block_of(j)) {
            ((None, a), (None, b)) => self.psi.as_ref().map_or(0.0, |p| p.get(a, b)),
            ((Some(g), a), (Some(h), b)) if g == h => self.local_block(g).get(a, b),
            _ => 0.0,
        }
    }

    /// Direction on the full space from the block-diagonal factor:
    /// `blockdiag(L) z / ‖z‖`.
    pub fn draw_joint_direction<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d_psi = self.dims.d_psi;
        let d_theta = self.dims.d_theta;
        let mut norm2 = 0.0;
        // Each block's fill normalises by its own ‖z_b‖; undo that and
        // renormalise by the joint norm.
        let mut rescale = |slice: &mut [f64], n2: f64| {
            let s = n2.sqrt();
            for v in slice.iter_mut() {
                *v *= s;
            }
            norm2 += n2;
        };
        if let Some(p) = &self.psi {
            let n2 = fill_unnormalised(p, rng, &mut out[..d_psi]);
            rescale(&mut out[..d_psi], n2);
        }
        for (j, chunk) in out[d_psi..].chunks_exact_mut(d_theta).enumerate() {
            let n2 = fill_unnormalised(self.local_block(j), rng, chunk);
            rescale(chunk, n2);
        }
        let inv = 1.0 / norm2.sqrt();
        for v in out.iter_mut() {
            *v *= inv;
        }
    }
}

fn fill_unnormalised<R: Rng + ?Sized>(block: &CovBlock, rng: &mut R, out: &mut [f64]) -> f64 {
    if block.dim == 1 {
        let z: f64 = rng.sample(StandardNormal);
        out[0] = block.chol[0] * z.signum();
        return z * z;
    }
    block.fill_direction(rng, out)
}

fn sample_cov<'a, I>(dim: usize, groups: I) -> DMatrix<f64>
where
    I: Iterator<Item = Vec<&'a [f64]>>,
{
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    let mut dof = 0usize;
    let mut mean = vec![0.0; dim];
    for rows in groups {
        let n = rows.len();
        if n < 2 {
            continue;
        }
        mean.iter_mut().for_each(|m| *m = 0.0);
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        for r in &rows {
            for a in 0..dim {
                let da = r[a] - mean[a];
                for b in 0..=a {
                    acc[(a, b)] += da * (r[b] - mean[b]);
                }
            }
        }
        dof += n - 1;
    }
    if dof > 0 {
        acc /= dof as f64;
    }
    for a in 0..dim {
        for b in 0..a {
            acc[(b, a)] = acc[(a, b)];
        }
    }
    acc
}

/// Sample covariance of the live cloud, block by block, plus jitter.
///
/// With `pool_local` the local blocks are replaced by the within-group
/// covariance averaged over groups.
pub fn estimate_block_cov(
    points: &[&[f64]],
    dims: ModelDims,
    pool_local: bool,
) -> Result<BlockCovariance> {
    if points.len() < 2 {
        return Err(Error::Contract(
            "covariance estimation needs at least two particles".into(),
        ));
    }
    if let Some(p) = points.iter().find(|p| p.len() != dims.d_total()) {
        return Err(Error::DimensionMismatch {
            expected: dims.d_total(),
            got: p.len(),
        });
    }
    let d_psi = dims.d_psi;
    let d_theta = dims.d_theta;
    let psi = if d_psi > 0 {
        let rows: Vec<&[f64]> = points.iter().map(|p| &p[..d_psi]).collect();
        Some(CovBlock::new(sample_cov(d_psi, std::iter::once(rows)))?)
    } else {
        None
    };
    let group_rows = |j: usize| -> Vec<&[f64]> {
        let start = d_psi + j * d_theta;
        points.iter().map(|p| &p[start..start + d_theta]).collect()
    };
    let local = if pool_local {
        LocalCov::Pooled(CovBlock::new(sample_cov(
            d_theta,
            (0..dims.n_groups).map(group_rows),
        ))?)
    } else {
        LocalCov::PerGroup(
            (0..dims.n_groups)
                .map(|j| CovBlock::new(sample_cov(d_theta, std::iter::once(group_rows(j)))))
                .collect::<Result<_>>()?,
        )
    };
    Ok(BlockCovariance { dims, psi, local })
}
