//! Ready-made targets: the 1D quadratic, the two-pixel TV posterior, and
//! TV / TGV image denoising posteriors.

use std::sync::Arc;

use crate::analytic::GaussModel1D;
use crate::error::{check_finite, Error, Result};
use crate::image::ImageGrid;
use crate::linop::{diff_pair, grad2d, scalar_map, sym_grad2d, tgv_block};
use crate::prox::ProxOperator;
use crate::samplers::{SmoothData, TargetSpec};

/// `f(y) = y^2 / (2 c_f)`, `g(x) = x^2 / (2 c_g)`, `K = k`, with all derivatives.
pub fn gauss1d_target(m: &GaussModel1D) -> Result<TargetSpec> {
    let (cf, cg) = (m.c_f, m.c_g);
    Ok(TargetSpec::new(
        ProxOperator::scaled_square(cg)?,
        ProxOperator::scaled_square(1.0 / cf)?,
        scalar_map(m.k),
    )?
    .with_g_grad(move |x, o| o[0] = x[0] / cg)
    .with_f_subgrad(move |w, o| o[0] = w[0] / cf)
    .with_smooth(SmoothData {
        f_grad: Arc::new(move |w, o| o[0] = w[0] / cf),
        f_hess: Arc::new(move |_, u, o| o[0] = u[0] / cf),
        fstar_grad: Arc::new(move |y, o| o[0] = cf * y[0]),
    }))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Minimal-norm subgradient of `alpha |.|_{2,1}` on interleaved groups.
fn group_subgradient(w: &[f64], out: &mut [f64], alpha: f64, group: usize) {
    for (o, g) in out.chunks_exact_mut(group).zip(w.chunks_exact(group)) {
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            let s = alpha / n;
            o.iter_mut().zip(g).for_each(|(a, b)| *a = s * b);
        } else {
            o.fill(0.0);
        }
    }
}

/// Posterior of two pixels with Gaussian likelihood around `observed` and
/// prior `exp(-alpha |x2 - x1|)`.
pub fn tv2pixel_target(observed: [f64; 2], sigma_eps: f64, alpha: f64) -> Result<TargetSpec> {
    positive("sigma_eps", sigma_eps)?;
    positive("alpha", alpha)?;
    check_finite("observation", &observed)?;
    Ok(TargetSpec::new(
        ProxOperator::quadratic_data(observed.to_vec(), sigma_eps * sigma_eps)?,
        ProxOperator::interval(alpha)?,
        diff_pair(),
    )?
    .with_f_subgrad(move |w, o| group_subgradient(w, o, alpha, 1)))
}

/// Unnormalized log-density of [`tv2pixel_target`] at `x`.
pub fn tv2pixel_log_density(x: [f64; 2], observed: [f64; 2], sigma_eps: f64, alpha: f64) -> f64 {
    let data = ((x[0] - observed[0]).powi(2) + (x[1] - observed[1]).powi(2)) / (2.0 * sigma_eps * sigma_eps);
    -data - alpha * (x[1] - x[0]).abs()
}

/// TV denoising posterior `exp(-|x - noisy|^2 / (2 s^2) - alpha |grad x|_{2,1})`.
pub fn tv_image_target(noisy: &ImageGrid, sigma_eps: f64, alpha: f64) -> Result<TargetSpec> {
    positive("sigma_eps", sigma_eps)?;
    positive("alpha", alpha)?;
    Ok(TargetSpec::new(
        ProxOperator::quadratic_data(noisy.data().to_vec(), sigma_eps * sigma_eps)?,
        ProxOperator::group_ball(alpha, 2)?,
        grad2d(noisy.width(), noisy.height())?,
    )?
    .with_f_subgrad(move |w, o| group_subgradient(w, o, alpha, 2)))
}

/// Second-order TGV posterior over `X = (u, v)` with
/// `K(u, v) = (grad u - v, E v)` and `f = alpha1 |.|_{2,1} + alpha0 |.|_{2,1}`.
pub fn tgv_image_target(noisy: &ImageGrid, sigma_eps: f64, alpha0: f64, alpha1: f64) -> Result<TargetSpec> {
    positive("sigma_eps", sigma_eps)?;
    positive("alpha0", alpha0)?;
    positive("alpha1", alpha1)?;
    let (w, h) = (noisy.width(), noisy.height());
    let n = w * h;
    let g = ProxOperator::blocks(vec![
        (n, ProxOperator::quadratic_data(noisy.data().to_vec(), sigma_eps * sigma_eps)?),
        (2 * n, ProxOperator::identity()),
    ])?;
    let fstar = ProxOperator::blocks(vec![
        (2 * n, ProxOperator::group_ball(alpha1, 2)?),
        (3 * n, ProxOperator::group_ball(alpha0, 3)?),
    ])?;
    Ok(TargetSpec::new(g, fstar, tgv_block(w, h, sym_grad2d(w, h)?)?)?.with_f_subgrad(move |z, o| {
        let (z1, z2) = z.split_at(2 * n);
        let (o1, o2) = o.split_at_mut(2 * n);
        group_subgradient(z1, o1, alpha1, 2);
        group_subgradient(z2, o2, alpha0, 3);
    }))
}
