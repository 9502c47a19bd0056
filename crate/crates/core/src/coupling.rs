//! Coupled-chain harnesses: synchronous couplings of two ULPDA chains,
//! contraction-rate fits, and step-size / step-ratio bias sweeps.

use rayon::prelude::*;

use crate::analytic::w2_gaussian_1d;
use crate::error::{check_len, Error, Result};
use crate::samplers::{
    chain_rng, fill_normal, validate_params, ChainState, Method, SamplerParams, Stepper, TargetSpec,
};

/// Distances between two synchronously coupled chains after `n` steps,
/// with `U = X - X~`, `V = Y - Y~` and `dU = U^n - U^{n-1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingRecord {
    pub n: u64,
    /// `|U|^2`
    pub primal_sq: f64,
    /// `|V|^2`
    pub dual_sq: f64,
    /// `|dU|^2`
    pub increment_sq: f64,
    /// `<K dU, V>`
    pub cross: f64,
    /// `|U|^2_{1/tau + 2 w_g} + |dU|^2_{1/tau} + |V|^2_{1/sigma + 2 w_f*} + 2 <K dU, V>`
    pub delta: f64,
    /// `|U|^2_{1/tau} + (1 - tau sigma L^2) |V|^2_{1/sigma}`
    pub stability: f64,
    /// `(|U|^2 + |V|^2 / lambda)^{1/2}`
    pub joint: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTrace {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    pub operator_norm: f64,
    pub omega_g: f64,
    pub omega_fstar: f64,
    pub records: Vec<CouplingRecord>,
}

impl CouplingTrace {
    /// Steps `n` where `delta[n+1] > theta delta[n] (1 + rel_tol) + abs_tol`.
    /// `abs_tol` absorbs rounding once the chains agree to machine precision.
    pub fn contraction_violations(&self, rel_tol: f64, abs_tol: f64) -> Vec<u64> {
        self.records
            .windows(2)
            .filter(|w| w[1].delta > self.theta * w[0].delta * (1.0 + rel_tol) + abs_tol)
            .map(|w| w[0].n)
            .collect()
    }

    /// Steps where the stability quantity exceeds its initial value.
    pub fn stability_violations(&self, rel_tol: f64) -> Vec<u64> {
        let first = self.records[0].stability;
        self.records
            .iter()
            .filter(|r| r.stability > first * (1.0 + rel_tol))
            .map(|r| r.n)
            .collect()
    }

    /// `(1 - tau sigma L^2)^{-1/2}`, the amplification allowed for the joint distance.
    pub fn joint_constant(&self) -> f64 {
        (1.0 - self.tau * self.sigma * self.operator_norm.powi(2)).powf(-0.5)
    }

    /// Largest `joint[n] / joint[0]` over the trace.
    pub fn max_joint_ratio(&self) -> f64 {
        let first = self.records[0].joint;
        self.records
            .iter()
            .map(|r| if first > 0.0 { r.joint / first } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

fn record(
    n: u64,
    a: &ChainState,
    b: &ChainState,
    target: &TargetSpec,
    trace: &CouplingTrace,
    lambda: f64,
    du: &mut [f64],
    kdu: &mut [f64],
) -> CouplingRecord {
    let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(s, t)| (s - t) * (s - t)).sum::<f64>();
    let primal_sq = sq(&a.x, &b.x);
    let dual_sq = sq(&a.y, &b.y);
    for i in 0..du.len() {
        du[i] = (a.x[i] - b.x[i]) - (a.x_prev[i] - b.x_prev[i]);
    }
    let increment_sq = du.iter().map(|v| v * v).sum::<f64>();
    target.k.apply_into(du, kdu);
    let cross: f64 = kdu.iter().zip(a.y.iter().zip(&b.y)).map(|(k, (p, q))| k * (p - q)).sum();
    let (tau, sigma) = (trace.tau, trace.sigma);
    let tsl = tau * sigma * trace.operator_norm.powi(2);
    CouplingRecord {
        n,
        primal_sq,
        dual_sq,
        increment_sq,
        cross,
        delta: primal_sq * (1.0 / tau + 2.0 * trace.omega_g)
            + increment_sq / tau
            + dual_sq * (1.0 / sigma + 2.0 * trace.omega_fstar)
            + 2.0 * cross,
        stability: primal_sq / tau + (1.0 - tsl) * dual_sq / sigma,
        joint: (primal_sq + dual_sq / lambda).sqrt(),
    }
}

/// Runs two ULPDA chains from `init_a` and `init_b` with identical noise
/// and records the coupling distances at every step (including step 0).
///
/// Requires `theta tau sigma L^2 <= 1`; with `theta < 1` the step sizes must
/// also lie in the strongly convex contraction regime.
pub fn run_coupled_pair(
    target: &TargetSpec,
    params: &SamplerParams,
    init_a: ChainState,
    init_b: ChainState,
    n_steps: u64,
) -> Result<CouplingTrace> {
    let report = validate_params(target, params)?;
    if params.theta < 1.0 && !report.contraction_regime {
        return Err(Error::RegimeViolation(format!(
            "theta = {} is below the contraction threshold {}",
            params.theta, report.contraction_theta_min
        )));
    }
    let mut sa = Stepper::new(target, params, Method::Ulpda)?;
    let mut sb = Stepper::new(target, params, Method::Ulpda)?;
    sa.check_state(&init_a)?;
    sb.check_state(&init_b)?;
    let (d, m) = target.dims();
    let mut trace = CouplingTrace {
        tau: params.tau,
        sigma: params.sigma(),
        theta: params.theta,
        operator_norm: report.operator_norm,
        omega_g: target.g_prox.modulus(),
        omega_fstar: target.fstar_prox.modulus(),
        records: Vec::with_capacity(n_steps as usize + 1),
    };
    let (mut a, mut b) = (init_a, init_b);
    let mut du = vec![0.0; d];
    let mut kdu = vec![0.0; m];
    let mut xi = vec![0.0; sa.noise_dim()];
    let mut rng = chain_rng(params.seed, 0);
    let r = record(0, &a, &b, target, &trace, params.lambda, &mut du, &mut kdu);
    trace.records.push(r);
    for n in 1..=n_steps {
        fill_normal(&mut rng, &mut xi);
        sa.step_with_noise(&mut a, &xi);
        sb.step_with_noise(&mut b, &xi);
        let r = record(n, &a, &b, target, &trace, params.lambda, &mut du, &mut kdu);
        if !(r.delta.is_finite() && r.stability.is_finite()) {
            return Err(Error::NonFinite("coupling trace"));
        }
        trace.records.push(r);
    }
    Ok(trace)
}

/// Least-squares slope of `ln delta[n]` against `n` for `n >= burn`.
/// Returns `-inf` once any considered `delta` is nonpositive (coupled chains met).
pub fn fit_contraction_rate(trace: &CouplingTrace, burn: usize) -> Result<f64> {
    if trace.records.len() <= burn + 2 {
        return Err(Error::InvalidParameter(format!(
            "trace of length {} too short for burn {burn}",
            trace.records.len()
        )));
    }
    let tail = &trace.records[burn..];
    if tail.iter().any(|r| r.delta <= 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let xs: Vec<f64> = tail.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.delta.ln()).collect();
    Ok(least_squares_slope(&xs, &ys))
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `ln w2` against `ln tau` (or `ln lambda`).
pub fn log_log_slope(xs: &[f64], w2: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = w2.iter().map(|v| v.ln()).collect();
    least_squares_slope(&lx, &ly)
}

/// Streaming mean and variance of a scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScalarMoments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl ScalarMoments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn var(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn merge(&mut self, o: &ScalarMoments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.count as f64, o.count as f64);
        let d = o.mean - self.mean;
        self.m2 += o.m2 + d * d * na * nb / (na + nb);
        self.mean += d * nb / (na + nb);
        self.count += o.count;
    }
}

/// What a bias sweep compares its chains against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BiasReference {
    /// Known Gaussian primal marginal.
    Gaussian { mean: f64, var: f64 },
    /// Chains at step `tau_ref`, driven by the same Brownian path as the
    /// sweep chains: a chain at `tau = r tau_ref` uses the normalized sum of
    /// `r` consecutive fine increments. Every `tau` must be a multiple of `tau_ref`.
    FineStep { tau_ref: f64 },
}

/// Simulation budget of a sweep, in continuous time units.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub n_chains: usize,
    pub burn_in_time: f64,
    /// Two consecutive windows of this length are recorded.
    pub window_time: f64,
    pub sample_every_time: f64,
    pub seed: u64,
    pub theta: f64,
    pub method: Method,
    /// Threshold on the W2 distance between the two windows' Gaussian fits,
    /// relative to the reference standard deviation.
    pub stationarity_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            n_chains: 1000,
            burn_in_time: 2.0,
            window_time: 2.0,
            sample_every_time: 0.01,
            seed: 0,
            theta: 1.0,
            method: Method::Ulpda,
            stationarity_tol: 1e-2,
        }
    }
}

/// One point of a sweep; `value` is `tau` or `lambda` (`inf` for Prox-Sub).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub tau: f64,
    pub mean: f64,
    pub var: f64,
    pub w2: f64,
    /// W2 between the Gaussian fits of the two recording windows, relative
    /// to the reference standard deviation.
    pub window_drift: f64,
    pub stationary: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Log-log slope of `w2` against `value` over the finite values.
    pub slope: f64,
    pub reference_mean: f64,
    pub reference_var: f64,
}

impl SweepResult {
    /// CSV with header `tau_or_lambda,w2,slope,flags`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau_or_lambda,w2,slope,flags\n");
        for p in &self.points {
            let flag = if p.stationary { "stationary" } else { "nonstationary" };
            out.push_str(&format!("{},{},{},{}\n", p.value, p.w2, self.slope, flag));
        }
        out
    }
}

fn check_scalar_target(target: &TargetSpec) -> Result<()> {
    if target.dims().0 != 1 {
        return Err(Error::InvalidParameter(
            "moment-based sweeps need a one-dimensional primal variable".into(),
        ));
    }
    Ok(())
}

fn steps_for(time: f64, tau: f64) -> u64 {
    (time / tau).round() as u64
}

/// Stationary W2 of the primal marginal for each `tau` at fixed `lambda`.
/// Samples are taken at common times so that a shared Brownian path
/// couples every level.
pub fn bias_sweep_tau(
    target: &TargetSpec,
    lambda: f64,
    taus: &[f64],
    reference: BiasReference,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    check_scalar_target(target)?;
    if taus.is_empty() || taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("taus must be nonempty and strictly decreasing".into()));
    }
    let params: Vec<SamplerParams> = taus
        .iter()
        .map(|&t| SamplerParams::new(t, lambda).with_theta(opts.theta).with_seed(opts.seed))
        .collect();
    for p in &params {
        Stepper::new(target, p, opts.method)?;
    }
    let unit = match reference {
        BiasReference::FineStep { tau_ref } => tau_ref,
        BiasReference::Gaussian { .. } => taus[taus.len() - 1],
    };
    let ratio = |t: f64| -> Result<u64> {
        let r = (t / unit).round();
        if r < 1.0 || ((r * unit - t) / t).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("tau {t} is not a multiple of {unit}")));
        }
        Ok(r as u64)
    };
    let ratios: Vec<u64> = taus.iter().map(|&t| ratio(t)).collect::<Result<_>>()?;
    let coarsest = ratios[0];
    let sample_every = ((opts.sample_every_time / unit / coarsest as f64).round().max(1.0) as u64) * coarsest;
    let burn = steps_for(opts.burn_in_time, unit * sample_every as f64) * sample_every;
    let window = steps_for(opts.window_time, unit * sample_every as f64) * sample_every;

    let ref_params = match reference {
        BiasReference::FineStep { tau_ref } => {
            let p = SamplerParams::new(tau_ref, lambda).with_theta(opts.theta).with_seed(opts.seed);
            Stepper::new(target, &p, opts.method)?;
            Some(p)
        }
        BiasReference::Gaussian { .. } => None,
    };
    let n_levels = taus.len() + ref_params.is_some() as usize;
    let (_, m) = target.dims();

    // Per chain: moments[level][window].
    let per_chain: Vec<Vec<[ScalarMoments; 2]>> = (0..opts.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(opts.seed, c as u64);
            let mut steppers: Vec<Stepper> = params
                .iter()
                .chain(ref_params.iter())
                .map(|p| Stepper::new(target, p, opts.method).expect("validated"))
                .collect();
            let mut ratios_all = ratios.clone();
            if ref_params.is_some() {
                ratios_all.push(1);
            }
            let mut states = vec![ChainState::new(vec![0.0], vec![0.0; m]); n_levels];
            let mut sums = vec![0.0; n_levels];
            let mut xi = [0.0];
            let mut acc = vec![[ScalarMoments::default(); 2]; n_levels];
            for step in 1..=burn + 2 * window {
                fill_normal(&mut rng, &mut xi);
                for l in 0..n_levels {
                    sums[l] += xi[0];
                    let r = ratios_all[l];
                    if step % r == 0 {
                        let z = [sums[l] / (r as f64).sqrt()];
                        sums[l] = 0.0;
                        steppers[l].step_with_noise(&mut states[l], &z);
                    }
                }
                if step > burn && (step - burn) % sample_every == 0 {
                    let w = ((step - burn - 1) / window) as usize;
                    for l in 0..n_levels {
                        acc[l][w].push(states[l].x[0]);
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = vec![[ScalarMoments::default(); 2]; n_levels];
    for chain in &per_chain {
        for (t, c) in total.iter_mut().zip(chain) {
            t[0].merge(&c[0]);
            t[1].merge(&c[1]);
        }
    }
    let both = |l: usize| {
        let mut s = total[l][0];
        s.merge(&total[l][1]);
        s
    };
    let (ref_mean, ref_var) = match reference {
        BiasReference::Gaussian { mean, var } => (mean, var),
        BiasReference::FineStep { .. } => {
            let s = both(n_levels - 1);
            (s.mean, s.var())
        }
    };
    let scale = ref_var.sqrt().max(f64::MIN_POSITIVE);
    let points: Vec<SweepPoint> = taus
        .iter()
        .enumerate()
        .map(|(l, &tau)| {
            let s = both(l);
            let drift = w2_gaussian_1d(total[l][0].mean, total[l][0].var(), total[l][1].mean, total[l][1].var()) / scale;
            SweepPoint {
                value: tau,
                tau,
                mean: s.mean,
                var: s.var(),
                w2: w2_gaussian_1d(s.mean, s.var(), ref_mean, ref_var),
                window_drift: drift,
                stationary: drift <= opts.stationarity_tol,
            }
        })
        .collect();
    let slope = if points.len() >= 2 {
        log_log_slope(taus, &points.iter().map(|p| p.w2).collect::<Vec<_>>())
    } else {
        f64::NAN
    };
    Ok(SweepResult {
        points,
        slope,
        reference_mean: ref_mean,
        reference_var: ref_var,
    })
}

/// Step size as a function of `lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauRule {
    Fixed(f64),
    /// `tau = sqrt(c / lambda) / |k|` so that `sigma tau k^2 = c`.
    ProductConstraint { k: f64, c: f64 },
}

impl TauRule {
    pub fn tau(&self, lambda: f64) -> f64 {
        match *self {
            TauRule::Fixed(t) => t,
            TauRule::ProductConstraint { k, c } => (c / lambda).sqrt() / k.abs(),
        }
    }
}

/// Budget of a step-ratio sweep, in steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSweepOptions {
    pub n_chains: usize,
    pub burn_in: u64,
    pub n_steps: u64,
    pub thinning: u64,
    pub seed: u64,
    /// Append a Prox-Sub run (the `lambda = inf` limit) at the step size of
    /// the largest `lambda`.
    pub include_prox_sub: bool,
    /// Curvature `h''` of a quadratic target. When set, each chain is paired
    /// with a ULA chain on `h` driven by the same noise, whose exact
    /// stationary variance `2 tau / (1 - (1 - tau h'')^2)` corrects the
    /// variance estimate.
    pub control_variate_curvature: Option<f64>,
    /// Relative tolerance on the drift between the two halves of the record.
    pub stationarity_tol: f64,
}

impl Default for LambdaSweepOptions {
    fn default() -> Self {
        Self {
            n_chains: 1000,
            burn_in: 5000,
            n_steps: 20_000,
            thinning: 10,
            seed: 0,
            include_prox_sub: false,
            control_variate_curvature: None,
            stationarity_tol: 1e-2,
        }
    }
}

/// Stationary W2 of the primal marginal to a Gaussian target reference for
/// each `lambda`.
pub fn lambda_sweep(
    target: &TargetSpec,
    lambdas: &[f64],
    tau_rule: TauRule,
    reference_mean: f64,
    reference_var: f64,
    opts: &LambdaSweepOptions,
) -> Result<SweepResult> {
    check_scalar_target(target)?;
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("lambdas must be nonempty and strictly increasing".into()));
    }
    if opts.thinning == 0 || opts.n_chains == 0 || opts.n_steps < 2 * opts.thinning {
        return Err(Error::InvalidParameter("sweep budget too small".into()));
    }
    let mut runs: Vec<(f64, Method, SamplerParams)> = lambdas
        .iter()
        .map(|&l| (l, Method::Ulpda, SamplerParams::new(tau_rule.tau(l), l).with_seed(opts.seed)))
        .collect();
    if opts.include_prox_sub {
        let last = *lambdas.last().expect("nonempty");
        runs.push((
            f64::INFINITY,
            Method::ProxSub,
            SamplerParams::new(tau_rule.tau(last), last).with_seed(opts.seed),
        ));
    }
    for (_, method, p) in &runs {
        Stepper::new(target, p, *method)?;
    }
    let (_, m) = target.dims();
    let half = opts.n_steps / 2;

    let points = runs
        .iter()
        .map(|(value, method, params)| {
            let tau = params.tau;
            let cv = opts.control_variate_curvature.map(|h| {
                let a = 1.0 - tau * h;
                (a, 2.0 * tau / (1.0 - a * a))
            });
            let per_chain: Vec<[[ScalarMoments; 2]; 2]> = (0..opts.n_chains)
                .into_par_iter()
                .map(|c| {
                    let mut rng = chain_rng(params.seed, c as u64);
                    let mut st = Stepper::new(target, params, *method).expect("validated");
                    let mut s = ChainState::new(vec![0.0], vec![0.0; m]);
                    let mut companion = 0.0;
                    let mut xi = vec![0.0; st.noise_dim()];
                    // acc[window][0] chain, acc[window][1] companion
                    let mut acc = [[ScalarMoments::default(); 2]; 2];
                    let root = (2.0 * tau).sqrt();
                    for step in 1..=opts.burn_in + opts.n_steps {
                        fill_normal(&mut rng, &mut xi);
                        st.step_with_noise(&mut s, &xi);
                        if let Some((a, _)) = cv {
                            companion = a * companion + root * xi[0];
                        }
                        if step > opts.burn_in && (step - opts.burn_in) % opts.thinning == 0 {
                            let w = ((step - opts.burn_in - 1) / half).min(1) as usize;
                            acc[w][0].push(s.x[0]);
                            acc[w][1].push(companion);
                        }
                    }
                    acc
                })
                .collect();
            let mut tot = [[ScalarMoments::default(); 2]; 2];
            for c in &per_chain {
                for w in 0..2 {
                    for j in 0..2 {
                        tot[w][j].merge(&c[w][j]);
                    }
                }
            }
            let estimate = |parts: &[[ScalarMoments; 2]]| -> (f64, f64) {
                let mut x = ScalarMoments::default();
                let mut u = ScalarMoments::default();
                for p in parts {
                    x.merge(&p[0]);
                    u.merge(&p[1]);
                }
                match cv {
                    Some((_, exact)) => (x.mean - u.mean, x.var() - u.var() + exact),
                    None => (x.mean, x.var()),
                }
            };
            let (mean, var) = estimate(&tot);
            let (m0, v0) = estimate(&tot[..1]);
            let (m1, v1) = estimate(&tot[1..]);
            let drift = w2_gaussian_1d(m0, v0, m1, v1) / reference_var.sqrt();
            SweepPoint {
                value: *value,
                tau,
                mean,
                var,
                w2: w2_gaussian_1d(mean, var, reference_mean, reference_var),
                window_drift: drift,
                stationary: drift <= opts.stationarity_tol,
            }
        })
        .collect::<Vec<_>>();
    let finite: Vec<&SweepPoint> = points.iter().filter(|p| p.value.is_finite()).collect();
    let slope = if finite.len() >= 2 {
        log_log_slope(
            &finite.iter().map(|p| p.value).collect::<Vec<_>>(),
            &finite.iter().map(|p| p.w2).collect::<Vec<_>>(),
        )
    } else {
        f64::NAN
    };
    Ok(SweepResult {
        points,
        slope,
        reference_mean,
        reference_var,
    })
}

/// Variance of the dual residual `Y - df(KX)` at stationarity, per chain
/// ensemble, using the target's subgradient selection.
pub fn dual_residual_variance(
    target: &TargetSpec,
    params: &SamplerParams,
    n_chains: usize,
    burn_in: u64,
    n_steps: u64,
) -> Result<f64> {
    let subgrad = target.f_subgrad.as_ref().ok_or(Error::MissingTargetData("subgradient of f"))?;
    Stepper::new(target, params, Method::Ulpda)?;
    let (d, m) = target.dims();
    check_len("residual dimension", m, m)?;
    let per_chain: Vec<ScalarMoments> = (0..n_chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = chain_rng(params.seed, c as u64);
            let mut st = Stepper::new(target, params, Method::Ulpda).expect("validated");
            let mut s = ChainState::new(vec![0.0; d], vec![0.0; m]);
            let mut kx = vec![0.0; m];
            let mut sg = vec![0.0; m];
            let mut acc = ScalarMoments::default();
            for step in 1..=burn_in + n_steps {
                st.step(&mut s, &mut rng);
                if step > burn_in {
                    target.k.apply_into(&s.x, &mut kx);
                    subgrad(&kx, &mut sg);
                    for (y, g) in s.y.iter().zip(&sg) {
                        acc.push(y - g);
                    }
                }
            }
            acc
        })
        .collect();
    let mut tot = ScalarMoments::default();
    per_chain.iter().for_each(|p| tot.merge(p));
    Ok(tot.var())
}
