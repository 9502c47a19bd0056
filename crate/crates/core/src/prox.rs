//! Proximal operators and projections.
//!
//! Every operator shares the call shape `(point, gamma) -> point`. Indicator
//! functions accept `gamma` and ignore it, since their resolvent is a
//! projection that does not depend on the step.
//!
//! Grouped vectors (the dual variable of an l2,1 norm) are stored with the
//! group components interleaved: for a gradient field that is `(h, v)` per
//! pixel, for a symmetrized gradient `(xx, yy, sqrt(2) xy)` per pixel.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_finite, check_len, Error, Result};

type InPlaceFn = dyn Fn(&mut [f64], f64) + Send + Sync;

/// Resolvent `(id + gamma * d phi)^{-1}` of a convex function `phi`,
/// together with the strong-convexity modulus of `phi`.
#[derive(Clone)]
pub struct ProxOperator {
    kind: ProxKind,
    label: String,
}

#[derive(Clone)]
enum ProxKind {
    Identity,
    ScaledSquare { c: f64 },
    QuadraticData { target: Arc<[f64]>, var: f64 },
    Interval { alpha: f64 },
    GroupBall { alpha: f64, group: usize },
    Blocks(Vec<(usize, ProxOperator)>),
    Custom { f: Arc<InPlaceFn>, modulus: f64 },
}

impl fmt::Debug for ProxOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxOperator")
            .field("label", &self.label)
            .field("modulus", &self.modulus())
            .finish()
    }
}

impl ProxOperator {
    /// Prox of the zero function.
    pub fn identity() -> Self {
        Self {
            kind: ProxKind::Identity,
            label: "zero".into(),
        }
    }

    /// Prox of `w -> |w|^2 / (2c)`.
    pub fn scaled_square(c: f64) -> Result<Self> {
        positive("c", c)?;
        Ok(Self {
            kind: ProxKind::ScaledSquare { c },
            label: format!("square/(2*{c})"),
        })
    }

    /// Prox of the Gaussian negative log-likelihood `|w - target|^2 / (2 var)`.
    pub fn quadratic_data(target: Vec<f64>, var: f64) -> Result<Self> {
        positive("var", var)?;
        check_finite("quadratic_data target", &target)?;
        Ok(Self {
            kind: ProxKind::QuadraticData {
                target: target.into(),
                var,
            },
            label: format!("gaussian-data(var={var})"),
        })
    }

    /// Projection onto `[-alpha, alpha]^n`, the prox of the conjugate of `alpha |.|_1`.
    pub fn interval(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self {
            kind: ProxKind::Interval { alpha },
            label: format!("project[-{alpha},{alpha}]"),
        })
    }

    /// Groupwise projection onto l2 balls of radius `alpha`, the prox of the
    /// conjugate of `alpha |.|_{2,1}` with interleaved groups of size `group`.
    pub fn group_ball(alpha: f64, group: usize) -> Result<Self> {
        positive("alpha", alpha)?;
        if group == 0 {
            return Err(Error::InvalidParameter("group size must be positive".into()));
        }
        Ok(Self {
            kind: ProxKind::GroupBall { alpha, group },
            label: format!("project-ball({alpha}, group {group})"),
        })
    }

    /// Separable prox acting on consecutive blocks of the given lengths.
    pub fn blocks(parts: Vec<(usize, ProxOperator)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("block prox needs at least one block".into()));
        }
        for (len, op) in &parts {
            if let Some(d) = op.dim() {
                check_len("block prox", *len, d)?;
            }
        }
        let label = parts
            .iter()
            .map(|(n, p)| format!("{}[{n}]", p.label))
            .collect::<Vec<_>>()
            .join(" x ");
        Ok(Self {
            kind: ProxKind::Blocks(parts),
            label,
        })
    }

    /// Wraps an arbitrary in-place resolvent.
    pub fn custom<F>(label: impl Into<String>, modulus: f64, f: F) -> Self
    where
        F: Fn(&mut [f64], f64) + Send + Sync + 'static,
    {
        Self {
            kind: ProxKind::Custom {
                f: Arc::new(f),
                modulus: modulus.max(0.0),
            },
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Strong-convexity modulus of the underlying function (0 if merely convex).
    pub fn modulus(&self) -> f64 {
        match &self.kind {
            ProxKind::Identity | ProxKind::Interval { .. } | ProxKind::GroupBall { .. } => 0.0,
            ProxKind::ScaledSquare { c } => 1.0 / c,
            ProxKind::QuadraticData { var, .. } => 1.0 / var,
            ProxKind::Blocks(parts) => parts
                .iter()
                .map(|(_, p)| p.modulus())
                .fold(f64::INFINITY, f64::min),
            ProxKind::Custom { modulus, .. } => *modulus,
        }
    }

    /// Fixed input dimension, if the operator has one.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            ProxKind::QuadraticData { target, .. } => Some(target.len()),
            ProxKind::Blocks(parts) => Some(parts.iter().map(|(n, _)| n).sum()),
            _ => None,
        }
    }

    /// Checked evaluation returning a fresh vector.
    pub fn eval(&self, point: &[f64], gamma: f64) -> Result<Vec<f64>> {
        check_finite("prox input", point)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("prox step gamma = {gamma}")));
        }
        if let Some(d) = self.dim() {
            check_len("prox input", d, point.len())?;
        }
        if let ProxKind::GroupBall { group, .. } = self.kind {
            if point.len() % group != 0 {
                return Err(Error::DimensionMismatch {
                    context: "grouped vector length",
                    expected: point.len().next_multiple_of(group),
                    actual: point.len(),
                });
            }
        }
        let mut out = point.to_vec();
        self.apply_in_place(&mut out, gamma);
        Ok(out)
    }

    /// Unchecked in-place evaluation used inside the samplers' inner loops.
    pub fn apply_in_place(&self, buf: &mut [f64], gamma: f64) {
        match &self.kind {
            ProxKind::Identity => {}
            ProxKind::ScaledSquare { c } => {
                let s = 1.0 / (1.0 + gamma / c);
                buf.iter_mut().for_each(|v| *v *= s);
            }
            ProxKind::QuadraticData { target, var } => {
                debug_assert_eq!(buf.len(), target.len());
                let r = gamma / var;
                let s = 1.0 / (1.0 + r);
                for (v, t) in buf.iter_mut().zip(target.iter()) {
                    *v = (*v + r * t) * s;
                }
            }
            ProxKind::Interval { alpha } => {
                buf.iter_mut().for_each(|v| *v = v.clamp(-alpha, *alpha));
            }
            ProxKind::GroupBall { alpha, group } => project_groups(buf, *alpha, *group),
            ProxKind::Blocks(parts) => {
                let mut rest = buf;
                for (len, op) in parts {
                    let (head, tail) = rest.split_at_mut(*len);
                    op.apply_in_place(head, gamma);
                    rest = tail;
                }
            }
            ProxKind::Custom { f, .. } => f(buf, gamma),
        }
    }
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")))
    }
}

fn project_groups(buf: &mut [f64], alpha: f64, group: usize) {
    for chunk in buf.chunks_exact_mut(group) {
        let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > alpha {
            let s = alpha / norm;
            chunk.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// `v / (1 + gamma / c)`, the prox of `|w|^2 / (2c)`.
pub fn prox_scaled_square(v: &[f64], gamma: f64, c: f64) -> Result<Vec<f64>> {
    ProxOperator::scaled_square(c)?.eval(v, gamma)
}

/// `(v + (gamma/var) target) / (1 + gamma/var)`.
pub fn prox_quadratic_data(v: &[f64], gamma: f64, target: &[f64], var: f64) -> Result<Vec<f64>> {
    check_len("prox_quadratic_data target", v.len(), target.len())?;
    ProxOperator::quadratic_data(target.to_vec(), var)?.eval(v, gamma)
}

/// Componentwise clamp to `[-alpha, alpha]`.
pub fn project_interval(v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    ProxOperator::interval(alpha)?.eval(v, 0.0)
}

/// Radial projection of every interleaved group of size `group` onto the
/// l2 ball of radius `alpha`. Zero groups stay at zero.
pub fn project_l2_ball_groups(v: &[f64], alpha: f64, group: usize) -> Result<Vec<f64>> {
    ProxOperator::group_ball(alpha, group)?.eval(v, 0.0)
}

/// Prox of `f` computed from the prox of its conjugate through the Moreau
/// decomposition `prox_{gamma f}(v) = v - gamma prox_{f*/gamma}(v / gamma)`.
pub fn prox_via_moreau(fstar_prox: &ProxOperator, v: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Moreau decomposition needs gamma > 0, got {gamma}"
        )));
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / gamma).collect();
    let conj = fstar_prox.eval(&scaled, 1.0 / gamma)?;
    Ok(v.iter().zip(&conj).map(|(x, c)| x - gamma * c).collect())
}
