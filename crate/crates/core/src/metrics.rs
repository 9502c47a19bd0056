//! Distances and statistics for sample clouds.

use crate::error::{check_finite, check_len, Error, Result};
use crate::image::ImageGrid;
use crate::samplers::{Accumulator, ChainState, SampleStore};

/// Default largest cloud accepted by [`w2_exact`].
pub const DEFAULT_ASSIGNMENT_CAP: usize = 2000;

/// Uniformly weighted point cloud, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    data: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyMeasure)?.len();
        let mut data = Vec::with_capacity(dim * points.len());
        for p in &points {
            check_len("point dimension", dim, p.len())?;
            data.extend_from_slice(p);
        }
        Self::from_flat(dim, data)
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.is_empty() || dim == 0 {
            return Err(Error::EmptyMeasure);
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "flat point data",
                expected: data.len().next_multiple_of(dim),
                actual: data.len(),
            });
        }
        check_finite("empirical measure", &data)?;
        Ok(Self { dim, data })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::from_flat(1, values)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// `|(x, y)|^2 = a |x|^2 + b |y|^2`, with `x` the first `split` coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedNorm {
    pub a: f64,
    pub b: f64,
    pub split: usize,
}

impl WeightedNorm {
    pub fn new(a: f64, b: f64, split: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("weights must be positive, got a={a}, b={b}")));
        }
        Ok(Self { a, b, split })
    }

    pub fn sq_dist(&self, u: &[f64], v: &[f64]) -> f64 {
        let s = self.split.min(u.len());
        let head: f64 = u[..s].iter().zip(&v[..s]).map(|(p, q)| (p - q) * (p - q)).sum();
        let tail: f64 = u[s..].iter().zip(&v[s..]).map(|(p, q)| (p - q) * (p - q)).sum();
        self.a * head + self.b * tail
    }
}

fn sq_euclid(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Exact W2 between one-dimensional clouds via the sorted (quantile)
/// coupling. Unequal sizes are compared at `max(n1, n2)` common quantile
/// levels, interpolating linearly between order statistics.
pub fn w2_1d(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> Result<f64> {
    check_len("w2_1d dimension", 1, mu.dim())?;
    check_len("w2_1d dimension", 1, nu.dim())?;
    let mut a = mu.data.clone();
    let mut b = nu.data.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        let s: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
        return Ok((s / a.len() as f64).sqrt());
    }
    let n = a.len().max(b.len());
    let s: f64 = (0..n)
        .map(|i| {
            let level = (i as f64 + 0.5) / n as f64;
            let d = quantile_sorted(&a, level) - quantile_sorted(&b, level);
            d * d
        })
        .sum();
    Ok((s / n as f64).sqrt())
}

fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let pos = (level * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let t = pos - lo as f64;
    sorted[lo] * (1.0 - t) + sorted[hi] * t
}

/// Exact W2 between equal-size clouds under the squared (optionally
/// weighted) Euclidean cost, by optimal assignment.
pub fn w2_exact(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, norm: Option<&WeightedNorm>) -> Result<f64> {
    w2_exact_with_cap(mu, nu, norm, DEFAULT_ASSIGNMENT_CAP)
}

pub fn w2_exact_with_cap(
    mu: &EmpiricalMeasure,
    nu: &EmpiricalMeasure,
    norm: Option<&WeightedNorm>,
    cap: usize,
) -> Result<f64> {
    check_len("w2_exact point dimension", mu.dim(), nu.dim())?;
    check_len("w2_exact sample counts", mu.len(), nu.len())?;
    let n = mu.len();
    if n > cap {
        return Err(Error::CapExceeded { count: n, cap });
    }
    let mut cost = vec![0.0; n * n];
    for (i, row) in cost.chunks_exact_mut(n).enumerate() {
        let p = mu.point(i);
        for (j, c) in row.iter_mut().enumerate() {
            let q = nu.point(j);
            *c = match norm {
                Some(w) => w.sq_dist(p, q),
                None => sq_euclid(p, q),
            };
        }
    }
    let assignment = solve_assignment(n, &cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total.max(0.0) / n as f64).sqrt())
}

/// Minimum-cost perfect matching of an `n x n` row-major cost matrix by
/// shortest augmenting paths with dual potentials. Returns the column
/// assigned to each row.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    // 1-based arrays; index 0 is the virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let crow = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = crow[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        out[row_of[j] - 1] = j - 1;
    }
    out
}

/// Sample mean and unbiased covariance (row-major `dim x dim`).
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl Moments {
    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.mean.len() + j]
    }
}

pub fn moments(mu: &EmpiricalMeasure) -> Result<Moments> {
    if mu.len() < 2 {
        return Err(Error::InvalidParameter("covariance needs at least two points".into()));
    }
    let mut acc = JointMoments::new(mu.dim());
    for p in mu.points() {
        acc.push(p);
    }
    acc.moments()
}

/// Streaming mean and covariance of `(x, y)` concatenated, mergeable in a
/// fixed order so that ensembles reduce deterministically.
#[derive(Clone, Debug, PartialEq)]
pub struct JointMoments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
    delta: Vec<f64>,
}

impl JointMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim * dim],
            delta: vec![0.0; dim],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, z: &[f64]) {
        let p = self.mean.len();
        self.count += 1;
        let n = self.count as f64;
        for i in 0..p {
            self.delta[i] = z[i] - self.mean[i];
            self.mean[i] += self.delta[i] / n;
        }
        for i in 0..p {
            let after = z[i] - self.mean[i];
            for j in 0..p {
                self.m2[i * p + j] += self.delta[j] * after;
            }
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn moments(&self) -> Result<Moments> {
        if self.count < 2 {
            return Err(Error::InvalidParameter("covariance needs at least two points".into()));
        }
        let s = 1.0 / (self.count - 1) as f64;
        let mut cov: Vec<f64> = self.m2.iter().map(|v| v * s).collect();
        let p = self.mean.len();
        for i in 0..p {
            for j in 0..i {
                let avg = 0.5 * (cov[i * p + j] + cov[j * p + i]);
                cov[i * p + j] = avg;
                cov[j * p + i] = avg;
            }
        }
        Ok(Moments {
            mean: self.mean.clone(),
            cov,
        })
    }

    pub fn merge_from(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let p = self.mean.len();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..p {
            self.delta[i] = other.mean[i] - self.mean[i];
        }
        for i in 0..p {
            for j in 0..p {
                self.m2[i * p + j] += other.m2[i * p + j] + self.delta[i] * self.delta[j] * na * nb / n;
            }
        }
        for i in 0..p {
            self.mean[i] += self.delta[i] * nb / n;
        }
        self.count += other.count;
    }
}

impl Accumulator for JointMoments {
    fn record(&mut self, state: &ChainState) {
        let d = state.x.len();
        let p = self.mean.len();
        self.count += 1;
        let n = self.count as f64;
        for i in 0..p {
            let z = if i < d { state.x[i] } else { state.y[i - d] };
            self.delta[i] = z - self.mean[i];
            self.mean[i] += self.delta[i] / n;
        }
        for i in 0..p {
            let z = if i < d { state.x[i] } else { state.y[i - d] };
            let after = z - self.mean[i];
            for j in 0..p {
                self.m2[i * p + j] += self.delta[j] * after;
            }
        }
    }

    fn merge(&mut self, other: Self) {
        self.merge_from(&other);
    }
}

/// Streaming per-coordinate mean and variance of `x` and `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMoments {
    count: u64,
    mean_x: Vec<f64>,
    m2_x: Vec<f64>,
    mean_y: Vec<f64>,
    m2_y: Vec<f64>,
}

impl DiagonalMoments {
    pub fn new(d: usize, m: usize) -> Self {
        Self {
            count: 0,
            mean_x: vec![0.0; d],
            m2_x: vec![0.0; d],
            mean_y: vec![0.0; m],
            m2_y: vec![0.0; m],
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean_x(&self) -> &[f64] {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &[f64] {
        &self.mean_y
    }

    /// Unbiased per-coordinate variance of `x`.
    pub fn var_x(&self) -> Result<Vec<f64>> {
        self.var(&self.m2_x)
    }

    /// Unbiased per-coordinate variance of `y`.
    pub fn var_y(&self) -> Result<Vec<f64>> {
        self.var(&self.m2_y)
    }

    fn var(&self, m2: &[f64]) -> Result<Vec<f64>> {
        if self.count < 2 {
            return Err(Error::InvalidParameter("variance needs at least two samples".into()));
        }
        let s = 1.0 / (self.count - 1) as f64;
        Ok(m2.iter().map(|v| v * s).collect())
    }
}

fn welford(mean: &mut [f64], m2: &mut [f64], z: &[f64], n: f64) {
    for ((mu, s), v) in mean.iter_mut().zip(m2.iter_mut()).zip(z) {
        let d = v - *mu;
        *mu += d / n;
        *s += d * (v - *mu);
    }
}

fn chan(mean: &mut [f64], m2: &mut [f64], om: &[f64], o2: &[f64], na: f64, nb: f64) {
    let n = na + nb;
    for i in 0..mean.len() {
        let d = om[i] - mean[i];
        m2[i] += o2[i] + d * d * na * nb / n;
        mean[i] += d * nb / n;
    }
}

impl Accumulator for DiagonalMoments {
    fn record(&mut self, state: &ChainState) {
        self.count += 1;
        let n = self.count as f64;
        welford(&mut self.mean_x, &mut self.m2_x, &state.x, n);
        welford(&mut self.mean_y, &mut self.m2_y, &state.y, n);
    }

    fn merge(&mut self, other: Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        chan(&mut self.mean_x, &mut self.m2_x, &other.mean_x, &other.m2_x, na, nb);
        chan(&mut self.mean_y, &mut self.m2_y, &other.mean_y, &other.m2_y, na, nb);
        self.count += other.count;
    }
}

/// Per-pixel unbiased variance of the primal samples in a store.
pub fn pixelwise_variance(store: &SampleStore, width: usize, height: usize) -> Result<ImageGrid> {
    check_len("pixel count", width * height, store.d)?;
    if store.n_samples() < 2 {
        return Err(Error::InvalidParameter("pixelwise variance needs at least two samples".into()));
    }
    let mut mean = vec![0.0; store.d];
    let mut m2 = vec![0.0; store.d];
    for (n, x) in store.primal_samples().enumerate() {
        welford(&mut mean, &mut m2, x, (n + 1) as f64);
    }
    let s = 1.0 / (store.n_samples() - 1) as f64;
    ImageGrid::new(width, height, m2.into_iter().map(|v| v * s).collect())
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical images.
pub fn psnr(reference: &ImageGrid, estimate: &ImageGrid, peak: f64) -> Result<f64> {
    if reference.width() != estimate.width() || reference.height() != estimate.height() {
        return Err(Error::DimensionMismatch {
            context: "psnr image size",
            expected: reference.len(),
            actual: estimate.len(),
        });
    }
    if !(peak > 0.0) {
        return Err(Error::InvalidParameter(format!("peak must be positive, got {peak}")));
    }
    let mse = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * (mse / (peak * peak)).log10())
}
