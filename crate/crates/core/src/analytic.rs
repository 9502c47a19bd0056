//! Closed forms for the one-dimensional quadratic model
//! `f(y) = y^2 / (2 c_f)`, `g(x) = x^2 / (2 c_g)`, `K = k`.

use crate::error::{Error, Result};

/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussModel1D {
    pub c_f: f64,
    pub c_g: f64,
    pub k: f64,
    pub lambda: f64,
}

impl GaussModel1D {
    pub fn new(c_f: f64, c_g: f64, k: f64, lambda: f64) -> Result<Self> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        pos("c_f", c_f)?;
        pos("c_g", c_g)?;
        pos("lambda", lambda)?;
        if k == 0.0 || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("k must be nonzero, got {k}")));
        }
        Ok(Self { c_f, c_g, k, lambda })
    }

    pub fn with_lambda(self, lambda: f64) -> Result<Self> {
        Self::new(self.c_f, self.c_g, self.k, lambda)
    }

    fn denom(&self) -> f64 {
        self.c_f + self.k * self.k * self.c_g
    }
}

/// Variance `c_f c_g / (c_f + k^2 c_g)` of the target.
pub fn target_variance(m: &GaussModel1D) -> f64 {
    m.c_f * m.c_g / m.denom()
}

/// Stationary covariance of the continuous-time primal-dual diffusion.
pub fn stationary_cov_pd(m: &GaussModel1D) -> Mat2 {
    let GaussModel1D { c_f, c_g, k, lambda } = *m;
    let s = 1.0 / (m.denom() * (1.0 + lambda * c_f * c_g));
    let off = s * k * lambda * c_f * c_g * c_g;
    [
        [s * (c_g * m.denom() + lambda * c_f * c_f * c_g * c_g), off],
        [off, s * k * k * lambda * c_g * c_g],
    ]
}

/// The `lambda -> infinity` limit of [`stationary_cov_pd`].
pub fn limiting_cov_pd(m: &GaussModel1D) -> Mat2 {
    let GaussModel1D { c_f, c_g, k, .. } = *m;
    let s = 1.0 / m.denom();
    [
        [s * c_f * c_g, s * k * c_g],
        [s * k * c_g, s * k * k * c_g / c_f],
    ]
}

/// Drift matrix of `dZ = -A Z dt + B dW` for the primal-dual diffusion.
pub fn a_pd(m: &GaussModel1D) -> Mat2 {
    [[1.0 / m.c_g, m.k], [-m.lambda * m.k, m.lambda * m.c_f]]
}

/// Noise column `(sqrt 2, 0)` of the primal-dual diffusion.
pub fn b_pd() -> [f64; 2] {
    [std::f64::consts::SQRT_2, 0.0]
}

/// Drift matrix of the modified diffusion.
pub fn a_mod(m: &GaussModel1D) -> Mat2 {
    let GaussModel1D { c_f, c_g, k, lambda } = *m;
    [
        [1.0 / c_g, k],
        [-lambda * k + k / (c_f * c_g) + k.powi(3) / (c_f * c_f), lambda * c_f],
    ]
}

/// Direction `(1, k / c_f)` of the modified diffusion's noise (scaled by sqrt 2).
pub fn b_mod(m: &GaussModel1D) -> [f64; 2] {
    [1.0, m.k / m.c_f]
}

/// `v_h = 1/c_g + k^2/c_f`, the curvature of the target potential.
pub fn v_h(m: &GaussModel1D) -> f64 {
    1.0 / m.c_g + m.k * m.k / m.c_f
}

/// Degenerate stationary covariance `v_h^{-1} b b^T` of the modified diffusion.
pub fn stationary_cov_mod(m: &GaussModel1D) -> Mat2 {
    let b = b_mod(m);
    let s = 1.0 / v_h(m);
    [[s * b[0] * b[0], s * b[0] * b[1]], [s * b[1] * b[0], s * b[1] * b[1]]]
}

/// Solves `A S + S A^T = B B^T` for symmetric `S`, where `B` is given by its
/// columns. Errors unless both eigenvalues of `A` have positive real part.
pub fn lyapunov_cov(a: Mat2, b_cols: &[[f64; 2]]) -> Result<Mat2> {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !(tr > 0.0 && det > 0.0) {
        return Err(Error::Singular(format!(
            "drift matrix is not stable (trace {tr}, determinant {det})"
        )));
    }
    let mut q = [0.0; 3];
    for c in b_cols {
        q[0] += c[0] * c[0];
        q[1] += c[0] * c[1];
        q[2] += c[1] * c[1];
    }
    // Unknowns (s11, s12, s22).
    let m = [
        [2.0 * a[0][0], 2.0 * a[0][1], 0.0],
        [a[1][0], a[0][0] + a[1][1], a[0][1]],
        [0.0, 2.0 * a[1][0], 2.0 * a[1][1]],
    ];
    let s = solve3(m, q)?;
    Ok([[s[0], s[1]], [s[1], s[2]]])
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Result<[f64; 3]> {
    let scale = m.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("nonempty range");
        if m[piv][col].abs() <= 1e-14 * scale {
            return Err(Error::Singular("Lyapunov system".into()));
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for c in col..3 {
                m[row][c] -= f * m[col][c];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|c| m[row][c] * x[c]).sum();
        x[row] = (r[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Stationary primal variance of the primal-dual diffusion driven by a
/// general constant noise matrix `[[b11, b12], [b21, b22]]`.
pub fn general_noise_primal_variance(m: &GaussModel1D, b11: f64, b12: f64, b21: f64, b22: f64) -> f64 {
    let GaussModel1D { c_f, c_g, k, lambda } = *m;
    let num = (b11 * b11 + b12 * b12) * (lambda * c_f * c_f * c_g * c_g + c_g * m.denom())
        - 2.0 * (b11 * b21 + b12 * b22) * k * c_f * c_g * c_g
        + (b21 * b21 + b22 * b22) * k * k * c_g * c_g / lambda;
    num / (2.0 * (1.0 + lambda * c_f * c_g) * m.denom())
}

/// Bound `C_1(lambda)` on the W2 distance between the primal marginal of the
/// primal-dual diffusion and the target.
pub fn bias_bound_c1(lambda: f64, omega_g: f64, omega_fstar: f64, d1: f64, d2: f64, d3: f64) -> Result<f64> {
    if !(omega_g > 0.0 && omega_fstar > 0.0) {
        return Err(Error::InvalidParameter("moduli must be positive".into()));
    }
    if lambda * omega_fstar <= omega_g {
        return Err(Error::InvalidParameter(format!(
            "bound needs lambda > omega_g / omega_f* = {}, got {lambda}",
            omega_g / omega_fstar
        )));
    }
    let v = d1 / (lambda * omega_g) + (d2 + d3) / (4.0 * omega_g * (lambda * omega_fstar - omega_g));
    Ok(v.sqrt())
}

/// W2 distance between `N(m1, v1)` and `N(m2, v2)` on the real line.
pub fn w2_gaussian_1d(m1: f64, v1: f64, m2: f64, v2: f64) -> f64 {
    let dm = m1 - m2;
    let ds = v1.max(0.0).sqrt() - v2.max(0.0).sqrt();
    (dm * dm + ds * ds).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(lambda: f64) -> GaussModel1D {
        GaussModel1D::new(1.0, 2.0, 1.5, lambda).unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng) -> GaussModel1D {
        let k = rng.random_range(0.1..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        GaussModel1D::new(
            rng.random_range(0.1..5.0),
            rng.random_range(0.1..5.0),
            k,
            10f64.powf(rng.random_range(-2.0..3.0)),
        )
        .unwrap()
    }

    #[test]
    fn target_variance_examples() {
        assert_abs_diff_eq!(target_variance(&model(1.0)), 2.0 / 5.5, epsilon = 1e-15);
        let small_k = GaussModel1D::new(1.0, 2.0, 1e-9, 1.0).unwrap();
        assert_abs_diff_eq!(target_variance(&small_k), 2.0, epsilon = 1e-12);
        let flat_g = GaussModel1D::new(0.7, 1e12, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(target_variance(&flat_g), 0.7, epsilon = 1e-9);
    }

    #[test]
    fn stationary_cov_examples() {
        let s = stationary_cov_pd(&model(1.0));
        assert_abs_diff_eq!(s[0][0], 15.0 / 16.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s[0][1], 6.0 / 16.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1][1], 9.0 / 16.5, epsilon = 1e-12);
        let lim = limiting_cov_pd(&model(1.0));
        let expect = [[2.0 / 5.5, 3.0 / 5.5], [3.0 / 5.5, 4.5 / 5.5]];
        let far = stationary_cov_pd(&model(1e9));
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(lim[i][j], expect[i][j], epsilon = 1e-15);
                assert_abs_diff_eq!(far[i][j], expect[i][j], epsilon = 1e-8);
            }
        }
        assert_abs_diff_eq!(stationary_cov_pd(&model(10.0))[0][0], 51.0 / 115.5, epsilon = 1e-12);
        assert_abs_diff_eq!(stationary_cov_pd(&model(100.0))[0][0], 411.0 / 1105.5, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_examples() {
        let s = lyapunov_cov([[1.0, 0.0], [0.0, 1.0]], &[[2f64.sqrt(), 0.0], [0.0, 2f64.sqrt()]]).unwrap();
        for (i, row) in s.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
        let s = lyapunov_cov([[3.0, 0.0], [0.0, 0.5]], &[[2f64.sqrt(), 0.0], [0.0, 2f64.sqrt()]]).unwrap();
        assert_abs_diff_eq!(s[0][0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1][1], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[0][1], 0.0, epsilon = 1e-15);
        assert!(lyapunov_cov([[-1.0, 0.0], [0.0, 1.0]], &[[1.0, 0.0]]).is_err());
        assert!(lyapunov_cov([[0.0, 0.0], [0.0, 0.0]], &[[1.0, 0.0]]).is_err());
    }

    #[test]
    fn closed_form_matches_lyapunov_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let m = random_model(&mut rng);
            let closed = stationary_cov_pd(&m);
            let lyap = lyapunov_cov(a_pd(&m), &[b_pd()]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(closed[i][j], lyap[i][j], max_relative = 1e-10, epsilon = 1e-300);
                }
            }
        }
    }

    #[test]
    fn general_noise_matches_lyapunov() {
        let m = model(1.0);
        let s = stationary_cov_pd(&m);
        assert_abs_diff_eq!(general_noise_primal_variance(&m, 2f64.sqrt(), 0.0, 0.0, 0.0), s[0][0], epsilon = 1e-14);
        assert_eq!(general_noise_primal_variance(&m, 0.0, 0.0, 0.0, 0.0), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let m = random_model(&mut rng);
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let lyap = lyapunov_cov(a_pd(&m), &[[b[0], b[2]], [b[1], b[3]]]).unwrap();
            let closed = general_noise_primal_variance(&m, b[0], b[1], b[2], b[3]);
            assert_relative_eq!(closed, lyap[0][0], max_relative = 1e-10);
        }
    }

    #[test]
    fn primal_variance_decreases_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let base = random_model(&mut rng);
            let tv = target_variance(&base);
            let mut prev = f64::INFINITY;
            for e in -20..=40 {
                let v = stationary_cov_pd(&base.with_lambda(10f64.powf(e as f64 / 10.0)).unwrap())[0][0];
                assert!(v < prev && v > tv);
                prev = v;
            }
        }
    }

    // The primal variance is a sum over the columns of b of one quadratic
    // form per coupling. If the normalized difference of the two forms is
    // definite, no b matches the target for both couplings.
    #[test]
    fn no_single_noise_matrix_fits_two_couplings() {
        let m1 = GaussModel1D::new(1.0, 2.0, 1.5, 1.0).unwrap();
        let m2 = GaussModel1D::new(1.0, 2.0, 0.5, 1.0).unwrap();
        let diff = |a: f64, b: f64| {
            general_noise_primal_variance(&m1, a, 0.0, b, 0.0) / target_variance(&m1)
                - general_noise_primal_variance(&m2, a, 0.0, b, 0.0) / target_variance(&m2)
        };
        let vals: Vec<f64> = (0..2000)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 2000.0;
                diff(t.cos(), t.sin())
            })
            .collect();
        let positive = vals[0] > 0.0;
        assert!(vals.iter().all(|v| (*v > 0.0) == positive && v.abs() > 0.3));
        // A matrix with both columns used still fits at most one coupling.
        let (b11, b12, b21, b22) = (1.0, 0.4, 0.3, -0.8);
        let s1 = (target_variance(&m1) / general_noise_primal_variance(&m1, b11, b12, b21, b22)).sqrt();
        let v2 = general_noise_primal_variance(&m2, s1 * b11, s1 * b12, s1 * b21, s1 * b22);
        assert!((v2 - target_variance(&m2)).abs() > 1e-2);
    }

    #[test]
    fn modified_covariance_is_invariant() {
        let m = model(10.0);
        let s = stationary_cov_mod(&m);
        assert_abs_diff_eq!(s[0][0], target_variance(&m), epsilon = 1e-15);
        // b is an eigenvector of A_mod with eigenvalue v_h.
        let a = a_mod(&m);
        let b = b_mod(&m);
        for i in 0..2 {
            assert_abs_diff_eq!(a[i][0] * b[0] + a[i][1] * b[1], v_h(&m) * b[i], epsilon = 1e-12);
        }
        // Exact solution of the Lyapunov equation with noise sqrt(2) b.
        let l = lyapunov_cov(a, &[[2f64.sqrt() * b[0], 2f64.sqrt() * b[1]]]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(l[i][j], s[i][j], epsilon = 1e-12);
            }
        }
        // Below lambda = k^2 / c_f^2 the transverse mode grows.
        assert!(lyapunov_cov(a_mod(&model(2.0)), &[b]).is_err());
    }

    #[test]
    fn bias_bound_examples() {
        let c = bias_bound_c1(4.0, 0.5, 1.0, 2.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(c, (2.0f64 / 2.0).sqrt(), epsilon = 1e-15);
        for lambda in [1e4, 1e6, 1e8] {
            let c = bias_bound_c1(lambda, 0.5, 1.0, 2.0, 0.0, 0.0).unwrap();
            assert_relative_eq!(c * lambda.sqrt(), (2.0f64 / 0.5).sqrt(), max_relative = 1e-12);
            // The second term is also of order 1/lambda and shifts the limit.
            let c = bias_bound_c1(lambda, 0.5, 1.0, 2.0, 0.3, 0.7).unwrap();
            let limit = (2.0f64 / 0.5 + 1.0 / (4.0 * 0.5 * 1.0)).sqrt();
            assert_relative_eq!(c * lambda.sqrt(), limit, max_relative = 1.0 / lambda);
        }
        assert!(bias_bound_c1(0.5, 0.5, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_w2_examples() {
        assert_eq!(w2_gaussian_1d(0.0, 4.0, 0.0, 1.0), 1.0);
        assert_eq!(w2_gaussian_1d(3.0, 1.0, 0.0, 1.0), 3.0);
        assert_abs_diff_eq!(w2_gaussian_1d(0.0, 4.0, 1.0, 9.0), 2f64.sqrt(), epsilon = 1e-15);
    }
}
