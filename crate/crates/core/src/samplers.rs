//! Markov chain update rules and ensemble execution.
//!
//! All samplers target `mu(x) ~ exp(-f(Kx) - g(x))`. The primal-dual chains
//! carry a dual variable `y` in the range of `K`; ULA and the modified SDE
//! use gradients instead of proximal maps.
//!
//! Each step is split into drawing a standard normal vector and applying a
//! deterministic map to it, so coupled chains can share noise exactly.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linop::LinearMap;
use crate::prox::ProxOperator;

/// `(point, out)` map such as a gradient or a subgradient selection.
pub type VecField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(at, direction, out)`: Hessian-vector product `H(at) direction`.
pub type HessianApply = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// Derivatives of a smooth `f`, required by ULA and the modified SDE.
#[derive(Clone)]
pub struct SmoothData {
    pub f_grad: VecField,
    pub f_hess: HessianApply,
    pub fstar_grad: VecField,
}

/// One sampling problem.
#[derive(Clone)]
pub struct TargetSpec {
    pub g_prox: ProxOperator,
    pub fstar_prox: ProxOperator,
    pub k: LinearMap,
    pub g_grad: Option<VecField>,
    /// Minimal-norm element of the subdifferential of `f`.
    pub f_subgrad: Option<VecField>,
    pub smooth: Option<SmoothData>,
}

impl std::fmt::Debug for TargetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TargetSpec")
            .field("g_prox", &self.g_prox)
            .field("fstar_prox", &self.fstar_prox)
            .field("dims", &self.k.dims())
            .field("g_grad", &self.g_grad.is_some())
            .field("f_subgrad", &self.f_subgrad.is_some())
            .field("smooth", &self.smooth.is_some())
            .finish()
    }
}

impl TargetSpec {
    pub fn new(g_prox: ProxOperator, fstar_prox: ProxOperator, k: LinearMap) -> Result<Self> {
        if let Some(d) = g_prox.dim() {
            check_len("g prox dimension", k.in_dim(), d)?;
        }
        if let Some(m) = fstar_prox.dim() {
            check_len("f* prox dimension", k.out_dim(), m)?;
        }
        Ok(Self {
            g_prox,
            fstar_prox,
            k,
            g_grad: None,
            f_subgrad: None,
            smooth: None,
        })
    }

    pub fn with_g_grad(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.g_grad = Some(Arc::new(f));
        self
    }

    pub fn with_f_subgrad(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.f_subgrad = Some(Arc::new(f));
        self
    }

    pub fn with_smooth(mut self, smooth: SmoothData) -> Self {
        self.smooth = Some(smooth);
        self
    }

    /// `(d, m)`.
    pub fn dims(&self) -> (usize, usize) {
        self.k.dims()
    }
}

/// Where the diffusion enters the primal-dual update.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseVariant {
    /// `sqrt(2 tau) xi` added after the primal prox.
    Outer,
    /// `sqrt(2 tau) xi` added inside the primal prox argument.
    Inner,
    /// `sqrt(tau) B_X xi` and `sqrt(tau) B_Y xi` with one `(d+m)`-dimensional
    /// draw; `B_X` is `d x (d+m)`, `B_Y` is `m x (d+m)`, both row-major.
    Generalized { bx: Arc<[f64]>, by: Arc<[f64]> },
}

impl NoiseVariant {
    /// Coefficients that reproduce [`NoiseVariant::Outer`].
    pub fn outer_as_generalized(d: usize, m: usize) -> Self {
        let n = d + m;
        let mut bx = vec![0.0; d * n];
        for i in 0..d {
            bx[i * n + i] = std::f64::consts::SQRT_2;
        }
        NoiseVariant::Generalized {
            bx: bx.into(),
            by: vec![0.0; m * n].into(),
        }
    }
}

/// Step sizes and randomness for one run. The dual step is `lambda * tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerParams {
    pub tau: f64,
    pub lambda: f64,
    pub theta: f64,
    pub noise: NoiseVariant,
    pub seed: u64,
}

impl SamplerParams {
    pub fn new(tau: f64, lambda: f64) -> Self {
        Self {
            tau,
            lambda,
            theta: 1.0,
            noise: NoiseVariant::Outer,
            seed: 0,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_noise(mut self, noise: NoiseVariant) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.lambda * self.tau
    }
}

/// State of one chain. `x_prev` is the previous primal iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub n: u64,
}

impl ChainState {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            x_prev: x.clone(),
            x,
            y,
            n: 0,
        }
    }

    /// Extrapolated point `x + theta (x - x_prev)`.
    pub fn x_theta(&self, theta: f64) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.x_prev)
            .map(|(a, b)| a + theta * (a - b))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Ulpda,
    Ula,
    ProxSub,
    ModifiedSde,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ulpda => "ulpda",
            Method::Ula => "ula",
            Method::ProxSub => "prox_sub",
            Method::ModifiedSde => "modified_sde",
        }
    }
}

/// Outcome of checking step sizes against the known convergence regimes.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub operator_norm: f64,
    pub tau_sigma_l2: f64,
    /// `theta = 1` and `tau sigma L^2 <= 1`.
    pub stability_regime: bool,
    /// `max{(1+2 w_g tau)^-1, (1+2 w_f* sigma)^-1} <= theta < 1` and `theta tau sigma L^2 <= 1`.
    pub contraction_regime: bool,
    /// As the contraction regime with `(1 + w tau)^-1` in place of `(1 + 2 w tau)^-1`.
    pub bias_regime: bool,
    pub contraction_theta_min: f64,
    pub bias_theta_min: f64,
}

const REGIME_TOL: f64 = 1e-12;

/// Checks step sizes. Only `theta tau sigma L^2 > 1` (or a nonpositive step)
/// is an error; the regime flags are informational.
pub fn validate_params(target: &TargetSpec, params: &SamplerParams) -> Result<ValidationReport> {
    let (tau, sigma, theta) = (params.tau, params.sigma(), params.theta);
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {theta}")));
    }
    let l = target.k.norm();
    let tsl = tau * sigma * l * l;
    if theta * tsl > 1.0 + REGIME_TOL {
        return Err(Error::RegimeViolation(format!(
            "theta*tau*sigma*L^2 = {} exceeds 1 (tau={tau}, sigma={sigma}, theta={theta}, L={l})",
            theta * tsl
        )));
    }
    let wg = target.g_prox.modulus();
    let wf = target.fstar_prox.modulus();
    let contraction_theta_min = (1.0 / (1.0 + 2.0 * wg * tau)).max(1.0 / (1.0 + 2.0 * wf * sigma));
    let bias_theta_min = (1.0 / (1.0 + wg * tau)).max(1.0 / (1.0 + wf * sigma));
    Ok(ValidationReport {
        operator_norm: l,
        tau_sigma_l2: tsl,
        stability_regime: theta == 1.0 && tsl <= 1.0 + REGIME_TOL,
        contraction_regime: theta < 1.0 && theta >= contraction_theta_min,
        bias_regime: theta < 1.0 && theta >= bias_theta_min,
        contraction_theta_min,
        bias_theta_min,
    })
}

/// Preallocated single-chain stepper. Steps mutate the state in place.
pub struct Stepper<'a> {
    target: &'a TargetSpec,
    params: &'a SamplerParams,
    method: Method,
    d: usize,
    m: usize,
    noise_dim: usize,
    xi: Vec<f64>,
    buf_d: Vec<f64>,
    buf_d2: Vec<f64>,
    buf_m: Vec<f64>,
    buf_m2: Vec<f64>,
    buf_m3: Vec<f64>,
    buf_m4: Vec<f64>,
}

impl<'a> Stepper<'a> {
    /// Validates the parameters and the target data the method needs.
    pub fn new(target: &'a TargetSpec, params: &'a SamplerParams, method: Method) -> Result<Self> {
        validate_params(target, params)?;
        let (d, m) = target.dims();
        match method {
            Method::Ulpda => {
                if let NoiseVariant::Generalized { bx, by } = &params.noise {
                    check_len("B_X entries", d * (d + m), bx.len())?;
                    check_len("B_Y entries", m * (d + m), by.len())?;
                }
            }
            Method::Ula => {
                target.g_grad.as_ref().ok_or(Error::MissingTargetData("gradient of g"))?;
                target.smooth.as_ref().ok_or(Error::MissingTargetData("gradient of f"))?;
            }
            Method::ProxSub => {
                target.f_subgrad.as_ref().ok_or(Error::MissingTargetData("subgradient of f"))?;
            }
            Method::ModifiedSde => {
                target.g_grad.as_ref().ok_or(Error::MissingTargetData("gradient of g"))?;
                target.smooth.as_ref().ok_or(Error::MissingTargetData("smooth derivatives of f"))?;
            }
        }
        let noise_dim = match (&params.noise, method) {
            (NoiseVariant::Generalized { .. }, Method::Ulpda) => d + m,
            _ => d,
        };
        Ok(Self {
            target,
            params,
            method,
            d,
            m,
            noise_dim,
            xi: vec![0.0; noise_dim],
            buf_d: vec![0.0; d],
            buf_d2: vec![0.0; d],
            buf_m: vec![0.0; m],
            buf_m2: vec![0.0; m],
            buf_m3: vec![0.0; m],
            buf_m4: vec![0.0; m],
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// Length of the standard normal vector consumed per step.
    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn check_state(&self, state: &ChainState) -> Result<()> {
        check_len("chain primal state", self.d, state.x.len())?;
        check_len("chain previous primal state", self.d, state.x_prev.len())?;
        check_len("chain dual state", self.m, state.y.len())?;
        Ok(())
    }

    /// Draws fresh noise from `rng` and steps.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut ChainState, rng: &mut R) {
        let mut xi = std::mem::take(&mut self.xi);
        fill_normal(rng, &mut xi);
        self.step_with_noise(state, &xi);
        self.xi = xi;
    }

    /// Steps with a caller-supplied standard normal vector of length
    /// [`Stepper::noise_dim`].
    pub fn step_with_noise(&mut self, state: &mut ChainState, xi: &[f64]) {
        debug_assert_eq!(xi.len(), self.noise_dim);
        match self.method {
            Method::Ulpda => self.ulpda(state, xi),
            Method::Ula => self.ula(state, xi),
            Method::ProxSub => self.prox_sub(state, xi),
            Method::ModifiedSde => self.modified_sde(state, xi),
        }
        state.n += 1;
    }

    fn ulpda(&mut self, s: &mut ChainState, xi: &[f64]) {
        let t = self.target;
        let (tau, sigma, theta) = (self.params.tau, self.params.sigma(), self.params.theta);
        let root = (2.0 * tau).sqrt();

        for ((o, a), b) in self.buf_d.iter_mut().zip(&s.x).zip(&s.x_prev) {
            *o = a + theta * (a - b);
        }
        t.k.apply_into(&self.buf_d, &mut self.buf_m);
        for (y, kx) in s.y.iter_mut().zip(&self.buf_m) {
            *y += sigma * kx;
        }
        t.fstar_prox.apply_in_place(&mut s.y, sigma);
        if let NoiseVariant::Generalized { by, .. } = &self.params.noise {
            add_scaled_matvec(by, xi, tau.sqrt(), &mut s.y);
        }

        t.k.adjoint_into(&s.y, &mut self.buf_d);
        s.x_prev.copy_from_slice(&s.x);
        for (x, kty) in s.x.iter_mut().zip(&self.buf_d) {
            *x -= tau * kty;
        }
        match &self.params.noise {
            NoiseVariant::Outer => {
                t.g_prox.apply_in_place(&mut s.x, tau);
                s.x.iter_mut().zip(xi).for_each(|(x, z)| *x += root * z);
            }
            NoiseVariant::Inner => {
                s.x.iter_mut().zip(xi).for_each(|(x, z)| *x += root * z);
                t.g_prox.apply_in_place(&mut s.x, tau);
            }
            NoiseVariant::Generalized { bx, .. } => {
                t.g_prox.apply_in_place(&mut s.x, tau);
                add_scaled_matvec(bx, xi, tau.sqrt(), &mut s.x);
            }
        }
    }

    /// Writes `grad h(x) = grad g(x) + K^T grad f(Kx)` into `buf_d`, leaving
    /// `Kx` in `buf_m` and `grad f(Kx)` in `buf_m2`.
    fn grad_h(&mut self, x: &[f64]) {
        let t = self.target;
        let smooth = t.smooth.as_ref().expect("checked at construction");
        let g_grad = t.g_grad.as_ref().expect("checked at construction");
        t.k.apply_into(x, &mut self.buf_m);
        (smooth.f_grad)(&self.buf_m, &mut self.buf_m2);
        t.k.adjoint_into(&self.buf_m2, &mut self.buf_d);
        g_grad(x, &mut self.buf_d2);
        for (a, b) in self.buf_d.iter_mut().zip(&self.buf_d2) {
            *a += b;
        }
    }

    fn ula(&mut self, s: &mut ChainState, xi: &[f64]) {
        let tau = self.params.tau;
        let root = (2.0 * tau).sqrt();
        self.grad_h(&s.x);
        s.x_prev.copy_from_slice(&s.x);
        for ((x, g), z) in s.x.iter_mut().zip(&self.buf_d).zip(xi) {
            *x += -tau * g + root * z;
        }
    }

    fn prox_sub(&mut self, s: &mut ChainState, xi: &[f64]) {
        let t = self.target;
        let tau = self.params.tau;
        let root = (2.0 * tau).sqrt();
        let subgrad = t.f_subgrad.as_ref().expect("checked at construction");
        t.k.apply_into(&s.x, &mut self.buf_m);
        subgrad(&self.buf_m, &mut s.y);
        t.k.adjoint_into(&s.y, &mut self.buf_d);
        s.x_prev.copy_from_slice(&s.x);
        for (x, kty) in s.x.iter_mut().zip(&self.buf_d) {
            *x -= tau * kty;
        }
        t.g_prox.apply_in_place(&mut s.x, tau);
        s.x.iter_mut().zip(xi).for_each(|(x, z)| *x += root * z);
    }

    // Euler-Maruyama for
    //   dX = -(grad g + K^T Y) dt + sqrt 2 dW
    //   dY = -[lambda (grad f*(Y) - KX) + M^T (grad g + K^T grad f(KX))] dt + sqrt 2 M^T dW
    // with M = K^T H_f(KX), so M^T u = H_f(KX) K u.
    fn modified_sde(&mut self, s: &mut ChainState, xi: &[f64]) {
        let t = self.target;
        let smooth = t.smooth.as_ref().expect("checked at construction");
        let g_grad = t.g_grad.as_ref().expect("checked at construction");
        let (tau, lambda) = (self.params.tau, self.params.lambda);
        let root = (2.0 * tau).sqrt();

        // buf_d <- grad h(x), buf_m <- Kx.
        self.grad_h(&s.x);
        // One Hessian product covers drift and noise: tau grad h - sqrt(2 tau) xi.
        for (g, z) in self.buf_d.iter_mut().zip(xi) {
            *g = tau * *g - root * z;
        }
        t.k.apply_into(&self.buf_d, &mut self.buf_m2);
        (smooth.f_hess)(&self.buf_m, &self.buf_m2, &mut self.buf_m3);
        (smooth.fstar_grad)(&s.y, &mut self.buf_m2);
        for (((n, y), gs), kx) in self.buf_m4.iter_mut().zip(&s.y).zip(&self.buf_m2).zip(&self.buf_m) {
            *n = y - tau * lambda * (gs - kx);
        }
        for (n, h) in self.buf_m4.iter_mut().zip(&self.buf_m3) {
            *n -= h;
        }

        // The primal drift uses the current dual iterate.
        g_grad(&s.x, &mut self.buf_d2);
        t.k.adjoint_into(&s.y, &mut self.buf_d);
        s.x_prev.copy_from_slice(&s.x);
        for ((x, (gg, kty)), z) in s.x.iter_mut().zip(self.buf_d2.iter().zip(&self.buf_d)).zip(xi) {
            *x += -tau * (gg + kty) + root * z;
        }
        s.y.copy_from_slice(&self.buf_m4);
    }
}

fn add_scaled_matvec(mat: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(mat.chunks_exact(cols)) {
        *o += scale * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

pub(crate) fn fill_normal<R: Rng + ?Sized>(rng: &mut R, buf: &mut [f64]) {
    for v in buf.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

/// Independent stream for chain `index` under `seed`.
pub fn chain_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn step_once<R: Rng + ?Sized>(
    state: &ChainState,
    target: &TargetSpec,
    params: &SamplerParams,
    method: Method,
    rng: &mut R,
) -> Result<ChainState> {
    let mut stepper = Stepper::new(target, params, method)?;
    stepper.check_state(state)?;
    let mut next = state.clone();
    stepper.step(&mut next, rng);
    Ok(next)
}

/// One ULPDA step.
pub fn ulpda_step<R: Rng + ?Sized>(
    state: &ChainState,
    target: &TargetSpec,
    params: &SamplerParams,
    rng: &mut R,
) -> Result<ChainState> {
    step_once(state, target, params, Method::Ulpda, rng)
}

/// One ULA step on `h = f(K.) + g`; `y` is left untouched.
pub fn ula_step<R: Rng + ?Sized>(
    state: &ChainState,
    target: &TargetSpec,
    params: &SamplerParams,
    rng: &mut R,
) -> Result<ChainState> {
    step_once(state, target, params, Method::Ula, rng)
}

/// One Prox-Sub step: exact dual `y = df(Kx)`, then a noisy proximal primal step.
pub fn prox_sub_step<R: Rng + ?Sized>(
    state: &ChainState,
    target: &TargetSpec,
    params: &SamplerParams,
    rng: &mut R,
) -> Result<ChainState> {
    step_once(state, target, params, Method::ProxSub, rng)
}

/// One Euler-Maruyama step of the modified primal-dual SDE.
pub fn modified_sde_step<R: Rng + ?Sized>(
    state: &ChainState,
    target: &TargetSpec,
    params: &SamplerParams,
    rng: &mut R,
) -> Result<ChainState> {
    step_once(state, target, params, Method::ModifiedSde, rng)
}

/// Initial distribution of an ensemble.
#[derive(Clone, Debug)]
pub enum InitSpec {
    /// Every chain starts at `(x, y)`.
    Point { x: Vec<f64>, y: Vec<f64> },
    /// Independent `N(mean, std^2)` entries, drawn from each chain's own stream.
    Gaussian { x_mean: Vec<f64>, y_mean: Vec<f64>, std: f64 },
    /// One explicit state per chain.
    States(Vec<ChainState>),
}

impl InitSpec {
    fn state_for(&self, index: usize, rng: &mut ChaCha8Rng) -> ChainState {
        match self {
            InitSpec::Point { x, y } => ChainState::new(x.clone(), y.clone()),
            InitSpec::Gaussian { x_mean, y_mean, std } => {
                let mut draw = |mean: &Vec<f64>| -> Vec<f64> {
                    mean.iter()
                        .map(|mu| {
                            let z: f64 = StandardNormal.sample(rng);
                            mu + std * z
                        })
                        .collect()
                };
                let x = draw(x_mean);
                let y = draw(y_mean);
                ChainState::new(x, y)
            }
            InitSpec::States(states) => states[index].clone(),
        }
    }

    fn check(&self, d: usize, m: usize, n_chains: usize) -> Result<()> {
        match self {
            InitSpec::Point { x, y } => {
                check_len("initial primal point", d, x.len())?;
                check_len("initial dual point", m, y.len())?;
                check_finite("initial point", x)?;
                check_finite("initial point", y)
            }
            InitSpec::Gaussian { x_mean, y_mean, std } => {
                check_len("initial primal mean", d, x_mean.len())?;
                check_len("initial dual mean", m, y_mean.len())?;
                if !(*std >= 0.0 && std.is_finite()) {
                    return Err(Error::InvalidParameter(format!("initial std {std}")));
                }
                Ok(())
            }
            InitSpec::States(states) => {
                check_len("initial states", n_chains, states.len())?;
                for s in states {
                    check_len("initial primal state", d, s.x.len())?;
                    check_len("initial dual state", m, s.y.len())?;
                    check_len("initial previous primal state", d, s.x_prev.len())?;
                }
                Ok(())
            }
        }
    }
}

/// Run length and recording schedule of an ensemble.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub n_chains: usize,
    pub n_steps: u64,
    /// First step index that is recorded.
    pub burn_in: u64,
    /// Records every `thinning`-th step after `burn_in`.
    pub thinning: u64,
}

impl RunConfig {
    pub fn new(n_chains: usize, n_steps: u64, burn_in: u64, thinning: u64) -> Self {
        Self {
            n_chains,
            n_steps,
            burn_in,
            thinning,
        }
    }

    /// Whether the state after `step` steps is recorded (`0 ..= n_steps`).
    pub fn records(&self, step: u64) -> bool {
        step >= self.burn_in && (step - self.burn_in) % self.thinning == 0
    }

    fn check(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidParameter("n_chains must be at least 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Thinned post-burn-in samples, grouped by chain in chain order.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStore {
    pub d: usize,
    pub m: usize,
    /// `chains[c]` holds that chain's recorded states in time order.
    pub chains: Vec<Vec<(Vec<f64>, Vec<f64>)>>,
    pub final_states: Vec<ChainState>,
}

impl SampleStore {
    pub fn n_samples(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn primal_samples(&self) -> impl Iterator<Item = &[f64]> {
        self.chains.iter().flatten().map(|(x, _)| x.as_slice())
    }

    pub fn dual_samples(&self) -> impl Iterator<Item = &[f64]> {
        self.chains.iter().flatten().map(|(_, y)| y.as_slice())
    }
}

/// Streaming per-chain statistics fed with every recorded state.
pub trait Accumulator: Send {
    fn record(&mut self, state: &ChainState);
    /// Appends another chain's statistics; called in chain order.
    fn merge(&mut self, other: Self)
    where
        Self: Sized;
}

/// Runs `n_chains` independent chains and folds every recorded state into a
/// fresh accumulator per chain, then merges them in chain order. The result
/// does not depend on the number of worker threads.
pub fn run_ensemble_with<A, F>(
    target: &TargetSpec,
    params: &SamplerParams,
    method: Method,
    run: &RunConfig,
    init: &InitSpec,
    make: F,
) -> Result<(A, Vec<ChainState>)>
where
    A: Accumulator,
    F: Fn() -> A + Sync,
{
    run.check()?;
    // Validation runs before any chain steps.
    Stepper::new(target, params, method)?;
    let (d, m) = target.dims();
    init.check(d, m, run.n_chains)?;

    let per_chain: Vec<(A, ChainState)> = (0..run.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(params.seed, c as u64);
            let mut state = init.state_for(c, &mut rng);
            let mut stepper = Stepper::new(target, params, method).expect("validated above");
            let mut acc = make();
            if run.records(0) {
                acc.record(&state);
            }
            for step in 1..=run.n_steps {
                stepper.step(&mut state, &mut rng);
                if run.records(step) {
                    acc.record(&state);
                }
            }
            (acc, state)
        })
        .collect();

    let mut finals = Vec::with_capacity(run.n_chains);
    let mut iter = per_chain.into_iter();
    let (mut acc, first) = iter.next().expect("n_chains >= 1");
    finals.push(first);
    for (a, s) in iter {
        acc.merge(a);
        finals.push(s);
    }
    Ok((acc, finals))
}

struct Recorder(Vec<Vec<(Vec<f64>, Vec<f64>)>>);

impl Accumulator for Recorder {
    fn record(&mut self, state: &ChainState) {
        self.0[0].push((state.x.clone(), state.y.clone()));
    }
    fn merge(&mut self, other: Self) {
        self.0.extend(other.0);
    }
}

/// Runs an ensemble and stores every recorded `(x, y)`.
pub fn run_ensemble(
    target: &TargetSpec,
    params: &SamplerParams,
    method: Method,
    run: &RunConfig,
    init: &InitSpec,
) -> Result<SampleStore> {
    let (rec, final_states) =
        run_ensemble_with(target, params, method, run, init, || Recorder(vec![Vec::new()]))?;
    let (d, m) = target.dims();
    Ok(SampleStore {
        d,
        m,
        chains: rec.0,
        final_states,
    })
}
