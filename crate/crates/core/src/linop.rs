//! Matrix-free linear operators with adjoints and cached norm estimates.
//!
//! Image vectors are row-major. Gradient fields interleave their two
//! components per pixel, symmetric tensor fields their three.

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_finite, check_len, Error, Result};

/// Relative inflation applied to the estimated norm when deriving step sizes.
pub const NORM_SAFETY_MARGIN: f64 = 1.01;

const NORM_ITERS: usize = 1000;
const NORM_SEED: u64 = 0x005e_ed0f_4a11;

/// Linear operator `K : R^d -> R^m`.
#[derive(Clone, Debug)]
pub struct LinearMap {
    kind: MapKind,
    norm: OnceLock<f64>,
}

#[derive(Clone, Debug)]
enum MapKind {
    Scalar(f64),
    DiffPair,
    Grad2d { w: usize, h: usize },
    SymGrad2d { w: usize, h: usize },
    Tgv { w: usize, h: usize, sym: Arc<LinearMap> },
    Dense { rows: usize, cols: usize, data: Arc<[f64]> },
}

/// `x -> k x` on the real line.
pub fn scalar_map(k: f64) -> LinearMap {
    LinearMap::new(MapKind::Scalar(k))
}

/// `(x1, x2) -> x2 - x1`.
pub fn diff_pair() -> LinearMap {
    LinearMap::new(MapKind::DiffPair)
}

/// Forward-difference gradient with Neumann boundary.
pub fn grad2d(width: usize, height: usize) -> Result<LinearMap> {
    image_dims(width, height)?;
    Ok(LinearMap::new(MapKind::Grad2d { w: width, h: height }))
}

/// Backward-difference symmetrized Jacobian of a vector field, stored as
/// `(d1 v1, d2 v2, (d2 v1 + d1 v2) / sqrt 2)` per pixel so that the
/// Euclidean norm of each triple is the Frobenius norm of the symmetric tensor.
pub fn sym_grad2d(width: usize, height: usize) -> Result<LinearMap> {
    image_dims(width, height)?;
    Ok(LinearMap::new(MapKind::SymGrad2d { w: width, h: height }))
}

/// TGV operator `(u, v) -> (grad u - v, E v)`.
pub fn tgv_block(width: usize, height: usize, sym_grad: LinearMap) -> Result<LinearMap> {
    image_dims(width, height)?;
    let n = width * height;
    check_len("tgv symmetrized gradient input", 2 * n, sym_grad.in_dim())?;
    check_len("tgv symmetrized gradient output", 3 * n, sym_grad.out_dim())?;
    Ok(LinearMap::new(MapKind::Tgv {
        w: width,
        h: height,
        sym: Arc::new(sym_grad),
    }))
}

/// Dense row-major `rows x cols` matrix.
pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<LinearMap> {
    check_len("dense matrix entries", rows * cols, data.len())?;
    check_finite("dense matrix", &data)?;
    Ok(LinearMap::new(MapKind::Dense {
        rows,
        cols,
        data: data.into(),
    }))
}

fn image_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidParameter(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

impl LinearMap {
    fn new(kind: MapKind) -> Self {
        Self {
            kind,
            norm: OnceLock::new(),
        }
    }

    /// Input dimension `d`.
    pub fn in_dim(&self) -> usize {
        match &self.kind {
            MapKind::Scalar(_) => 1,
            MapKind::DiffPair => 2,
            MapKind::Grad2d { w, h } => w * h,
            MapKind::SymGrad2d { w, h } => 2 * w * h,
            MapKind::Tgv { w, h, .. } => 3 * w * h,
            MapKind::Dense { cols, .. } => *cols,
        }
    }

    /// Output dimension `m`.
    pub fn out_dim(&self) -> usize {
        match &self.kind {
            MapKind::Scalar(_) | MapKind::DiffPair => 1,
            MapKind::Grad2d { w, h } => 2 * w * h,
            MapKind::SymGrad2d { w, h } => 3 * w * h,
            MapKind::Tgv { w, h, .. } => 5 * w * h,
            MapKind::Dense { rows, .. } => *rows,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.in_dim(), self.out_dim())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("operator input", self.in_dim(), x.len())?;
        let mut out = vec![0.0; self.out_dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("adjoint input", self.out_dim(), y.len())?;
        let mut out = vec![0.0; self.in_dim()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }

    /// `out = K x`; lengths are the caller's responsibility.
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim());
        debug_assert_eq!(out.len(), self.out_dim());
        match &self.kind {
            MapKind::Scalar(k) => out[0] = k * x[0],
            MapKind::DiffPair => out[0] = x[1] - x[0],
            MapKind::Grad2d { w, h } => grad_forward(x, *w, *h, out),
            MapKind::SymGrad2d { w, h } => sym_forward(x, *w, *h, out),
            MapKind::Tgv { w, h, sym } => {
                let n = w * h;
                let (u, v) = x.split_at(n);
                let (p, q) = out.split_at_mut(2 * n);
                grad_forward(u, *w, *h, p);
                p.iter_mut().zip(v).for_each(|(a, b)| *a -= b);
                sym.apply_into(v, q);
            }
            MapKind::Dense { cols, data, .. } => {
                for (o, row) in out.iter_mut().zip(data.chunks_exact(*cols)) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// `out = K^T y`; lengths are the caller's responsibility.
    pub fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.out_dim());
        debug_assert_eq!(out.len(), self.in_dim());
        match &self.kind {
            MapKind::Scalar(k) => out[0] = k * y[0],
            MapKind::DiffPair => {
                out[0] = -y[0];
                out[1] = y[0];
            }
            MapKind::Grad2d { w, h } => grad_adjoint(y, *w, *h, out),
            MapKind::SymGrad2d { w, h } => sym_adjoint(y, *w, *h, out),
            MapKind::Tgv { w, h, sym } => {
                let n = w * h;
                let (p, q) = y.split_at(2 * n);
                let (u, v) = out.split_at_mut(n);
                grad_adjoint(p, *w, *h, u);
                sym.adjoint_into(q, v);
                v.iter_mut().zip(p).for_each(|(a, b)| *a -= b);
            }
            MapKind::Dense { cols, data, .. } => {
                out.fill(0.0);
                for (yi, row) in y.iter().zip(data.chunks_exact(*cols)) {
                    out.iter_mut().zip(row).for_each(|(o, a)| *o += yi * a);
                }
            }
        }
    }

    /// Operator norm, computed once. Closed form where available, otherwise
    /// a power-iteration estimate (a lower bound on the true norm).
    pub fn norm(&self) -> f64 {
        *self.norm.get_or_init(|| match &self.kind {
            MapKind::Scalar(k) => k.abs(),
            MapKind::DiffPair => std::f64::consts::SQRT_2,
            _ => power_iteration_norm(self, NORM_ITERS, NORM_SEED),
        })
    }

    /// Norm inflated by [`NORM_SAFETY_MARGIN`], for deriving step sizes.
    pub fn step_norm(&self) -> f64 {
        self.norm() * NORM_SAFETY_MARGIN
    }
}

/// Power iteration on `K^T K` from a seeded Gaussian start. Returns the
/// largest square-rooted Rayleigh quotient seen, so the result is
/// nondecreasing in `iters` for a fixed seed.
pub fn power_iteration_norm(op: &LinearMap, iters: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..op.in_dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut kx = vec![0.0; op.out_dim()];
    let mut best = 0.0_f64;
    for _ in 0..iters.max(1) {
        let nx = norm2(&x);
        if nx == 0.0 {
            return best;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        op.apply_into(&x, &mut kx);
        let est = norm2(&kx);
        best = best.max(est);
        if est == 0.0 {
            return best;
        }
        op.adjoint_into(&kx, &mut x);
    }
    best
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn grad_forward(u: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            out[2 * i] = if c + 1 < w { u[i + 1] - u[i] } else { 0.0 };
            out[2 * i + 1] = if r + 1 < h { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

fn grad_adjoint(p: &[f64], w: usize, h: usize, out: &mut [f64]) {
    out.fill(0.0);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                let a = p[2 * i];
                out[i] -= a;
                out[i + 1] += a;
            }
            if r + 1 < h {
                let b = p[2 * i + 1];
                out[i] -= b;
                out[i + w] += b;
            }
        }
    }
}

// Backward differences with replicated boundary, so the first row/column
// difference vanishes and constant fields lie in the kernel.
fn sym_forward(v: &[f64], w: usize, h: usize, out: &mut [f64]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let (v1, v2) = (v[2 * i], v[2 * i + 1]);
            let (d1v1, d1v2) = if c > 0 {
                (v1 - v[2 * (i - 1)], v2 - v[2 * (i - 1) + 1])
            } else {
                (0.0, 0.0)
            };
            let (d2v1, d2v2) = if r > 0 {
                (v1 - v[2 * (i - w)], v2 - v[2 * (i - w) + 1])
            } else {
                (0.0, 0.0)
            };
            out[3 * i] = d1v1;
            out[3 * i + 1] = d2v2;
            out[3 * i + 2] = s * (d2v1 + d1v2);
        }
    }
}

fn sym_adjoint(q: &[f64], w: usize, h: usize, out: &mut [f64]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    out.fill(0.0);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let (a, b, e) = (q[3 * i], q[3 * i + 1], s * q[3 * i + 2]);
            if c > 0 {
                // d1 v1 with weight a, d1 v2 with weight e
                out[2 * i] += a;
                out[2 * (i - 1)] -= a;
                out[2 * i + 1] += e;
                out[2 * (i - 1) + 1] -= e;
            }
            if r > 0 {
                // d2 v2 with weight b, d2 v1 with weight e
                out[2 * i + 1] += b;
                out[2 * (i - w) + 1] -= b;
                out[2 * i] += e;
                out[2 * (i - w)] -= e;
            }
        }
    }
}
