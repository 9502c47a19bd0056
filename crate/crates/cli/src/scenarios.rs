//! Scenario runners. Each one samples, computes summaries and writes its
//! artifacts into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pdlangevin::analytic::{
    general_noise_primal_variance, stationary_cov_mod, stationary_cov_pd, target_variance, GaussModel1D,
};
use pdlangevin::coupling::{bias_sweep_tau, lambda_sweep, BiasReference, LambdaSweepOptions, SweepOptions, TauRule};
use pdlangevin::image::{add_gaussian_noise, load_image_pgm, phantom, save_image_pgm};
use pdlangevin::metrics::{psnr, w2_exact, DiagonalMoments, EmpiricalMeasure, JointMoments};
use pdlangevin::problems::{gauss1d_target, tgv_image_target, tv2pixel_target, tv_image_target};
use pdlangevin::samplers::{run_ensemble_with, validate_params, Accumulator, ValidationReport};
use pdlangevin::{
    run_ensemble, ChainState, ImageGrid, InitSpec, Method, NoiseVariant, RunConfig, SamplerParams, TargetSpec,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{SamplerKind, Scenario, ScenarioConfig, SweepKind};
use crate::error::{CliError, CliResult};
use crate::output::{content_hash, write_csv, write_json};
use crate::gauss1d_stepsizes;

/// Metrics and the paths written by one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub metrics: Value,
}

pub fn method_of(kind: SamplerKind) -> Method {
    match kind {
        SamplerKind::UlpdaOuter | SamplerKind::UlpdaInner | SamplerKind::UlpdaGeneral => Method::Ulpda,
        SamplerKind::Ula => Method::Ula,
        SamplerKind::ProxSub => Method::ProxSub,
        SamplerKind::ModifiedSde => Method::ModifiedSde,
    }
}

fn gauss_model(cfg: &ScenarioConfig) -> CliResult<GaussModel1D> {
    Ok(GaussModel1D::new(cfg.c_f, cfg.c_g, cfg.k, cfg.lambda)?)
}

/// Primal step size of the configured run.
pub fn resolve_tau(cfg: &ScenarioConfig) -> CliResult<f64> {
    match (cfg.tau, cfg.step_c) {
        (Some(t), _) => Ok(t),
        (None, Some(c)) => Ok(gauss1d_stepsizes(cfg.lambda, cfg.k, c)?.0),
        (None, None) => Err(CliError::Config("tau is required".into())),
    }
}

pub fn sampler_params(cfg: &ScenarioConfig, dims: (usize, usize)) -> CliResult<SamplerParams> {
    let (d, m) = dims;
    let noise = match cfg.sampler {
        SamplerKind::UlpdaInner => NoiseVariant::Inner,
        SamplerKind::UlpdaGeneral => match (&cfg.noise_bx, &cfg.noise_by) {
            (None, None) => NoiseVariant::outer_as_generalized(d, m),
            (Some(bx), Some(by)) => NoiseVariant::Generalized {
                bx: Arc::from(bx.as_slice()),
                by: Arc::from(by.as_slice()),
            },
            _ => return Err(CliError::Config("noise_bx and noise_by must be given together".into())),
        },
        _ => NoiseVariant::Outer,
    };
    Ok(SamplerParams::new(resolve_tau(cfg)?, cfg.lambda)
        .with_theta(cfg.theta)
        .with_noise(noise)
        .with_seed(cfg.seed))
}

/// Clean image: the configured PGM or the synthetic phantom.
pub fn clean_image(cfg: &ScenarioConfig) -> CliResult<ImageGrid> {
    match &cfg.input_image {
        Some(p) => Ok(load_image_pgm(p)?),
        None => Ok(phantom(cfg.width, cfg.height)?),
    }
}

/// Builds the target of a scenario. Image scenarios also return the clean
/// and noisy images.
pub fn build_target(cfg: &ScenarioConfig) -> CliResult<(TargetSpec, Option<(ImageGrid, ImageGrid)>)> {
    match cfg.scenario {
        Scenario::Gauss1d | Scenario::Sweep => Ok((gauss1d_target(&gauss_model(cfg)?)?, None)),
        Scenario::Tv2pixel => Ok((tv2pixel_target(cfg.observation, cfg.sigma_eps, cfg.alpha)?, None)),
        Scenario::TvImage | Scenario::TgvImage => {
            let clean = clean_image(cfg)?;
            let noisy = add_gaussian_noise(&clean, cfg.sigma_eps, cfg.seed)?;
            let t = if cfg.scenario == Scenario::TvImage {
                tv_image_target(&noisy, cfg.sigma_eps, cfg.alpha)?
            } else {
                tgv_image_target(&noisy, cfg.sigma_eps, cfg.alpha0(), cfg.alpha1())?
            };
            Ok((t, Some((clean, noisy))))
        }
    }
}

/// Parameter check without sampling. Step-size sweeps are checked at their coarsest step; step-ratio sweeps
/// at their largest ratio.
pub fn validate(cfg: &ScenarioConfig) -> CliResult<(ValidationReport, SamplerParams)> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.scenario == Scenario::Sweep {
        let max = cfg.sweep_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        match cfg.sweep_kind {
            SweepKind::Tau => cfg.tau = Some(max),
            SweepKind::Lambda => cfg.lambda = max,
        }
    }
    let (target, _) = build_target(&cfg)?;
    let params = sampler_params(&cfg, target.dims())?;
    let report = validate_params(&target, &params)?;
    Ok((report, params))
}

fn regime_json(r: &ValidationReport) -> Value {
    json!({
        "operator_norm": r.operator_norm,
        "tau_sigma_l2": r.tau_sigma_l2,
        "stability_regime": r.stability_regime,
        "contraction_regime": r.contraction_regime,
        "bias_regime": r.bias_regime,
        "contraction_theta_min": r.contraction_theta_min,
        "bias_theta_min": r.bias_theta_min,
    })
}

/// Hash of everything that determines the results: the config without its
/// output directory, followed by the input image bytes.
fn input_hash(cfg: &ScenarioConfig) -> CliResult<String> {
    let mut value = serde_json::to_value(cfg)?;
    if let Value::Object(map) = &mut value {
        map.remove("output_dir");
    }
    let mut bytes = serde_json::to_vec(&value)?;
    if let Some(p) = &cfg.input_image {
        bytes.extend(fs::read(p)?);
    }
    Ok(content_hash(&bytes))
}

/// Runs the configured scenario and writes its artifacts plus `manifest.json`.
pub fn run_scenario(cfg: &ScenarioConfig) -> CliResult<RunReport> {
    cfg.validate()?;
    let (report, params) = validate(cfg)?;
    fs::create_dir_all(&cfg.output_dir)?;
    let out = cfg.output_dir.as_path();
    let mut files = Vec::new();
    let metrics = match cfg.scenario {
        Scenario::Gauss1d => run_gauss1d(cfg, &params, out, &mut files)?,
        Scenario::Tv2pixel => run_tv2pixel(cfg, &params, out, &mut files)?,
        Scenario::TvImage | Scenario::TgvImage => run_image(cfg, &params, out, &mut files)?,
        Scenario::Sweep => run_sweep(cfg, out, &mut files)?,
    };
    let manifest = json!({
        "config": cfg,
        "tau": params.tau,
        "sigma": params.sigma(),
        "regime": regime_json(&report),
        "input_hash": input_hash(cfg)?,
        "metrics": metrics,
        "files": files.iter().map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
    });
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    files.push(path);
    Ok(RunReport { files, metrics })
}

// ---------------------------------------------------------------------------
// 1D quadratic

struct Gauss1dAcc {
    joint: JointMoments,
    counts: Vec<u64>,
    lo: f64,
    width: f64,
}

impl Accumulator for Gauss1dAcc {
    fn record(&mut self, state: &ChainState) {
        self.joint.push(&[state.x[0], state.y[0]]);
        let b = ((state.x[0] - self.lo) / self.width).floor();
        if b >= 0.0 && (b as usize) < self.counts.len() {
            self.counts[b as usize] += 1;
        }
    }

    fn merge(&mut self, other: Self) {
        self.joint.merge_from(&other.joint);
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
    }
}

/// Continuous-time stationary covariance of `(x, y)` for the configured
/// sampler, or just the primal variance where no joint oracle exists.
fn gauss1d_oracle(cfg: &ScenarioConfig, m: &GaussModel1D) -> (f64, Option<[[f64; 2]; 2]>) {
    match cfg.sampler {
        SamplerKind::UlpdaOuter | SamplerKind::UlpdaInner => {
            let c = stationary_cov_pd(m);
            (c[0][0], Some(c))
        }
        SamplerKind::UlpdaGeneral => match (&cfg.noise_bx, &cfg.noise_by) {
            (Some(bx), Some(by)) if bx.len() == 2 && by.len() == 2 => {
                (general_noise_primal_variance(m, bx[0], bx[1], by[0], by[1]), None)
            }
            _ => {
                let c = stationary_cov_pd(m);
                (c[0][0], Some(c))
            }
        },
        SamplerKind::ModifiedSde => {
            let c = stationary_cov_mod(m);
            (c[0][0], Some(c))
        }
        SamplerKind::Ula | SamplerKind::ProxSub => (target_variance(m), None),
    }
}

/// Joint moments of a 1D quadratic ensemble, without writing files.
pub fn gauss1d_moments(cfg: &ScenarioConfig, params: &SamplerParams) -> CliResult<JointMoments> {
    Ok(gauss1d_ensemble(cfg, params, 1, 1.0)?.joint)
}

fn gauss1d_ensemble(cfg: &ScenarioConfig, params: &SamplerParams, bins: usize, half_width: f64) -> CliResult<Gauss1dAcc> {
    let m = gauss_model(cfg)?;
    let target = gauss1d_target(&m)?;
    let run = RunConfig::new(cfg.n_chains, cfg.burn_in + cfg.n_steps, cfg.burn_in, cfg.thinning);
    let init = InitSpec::Point { x: vec![0.0], y: vec![0.0] };
    let width = 2.0 * half_width / bins as f64;
    let (acc, _) = run_ensemble_with(&target, params, method_of(cfg.sampler), &run, &init, || Gauss1dAcc {
        joint: JointMoments::new(2),
        counts: vec![0; bins],
        lo: -half_width,
        width,
    })?;
    Ok(acc)
}

fn run_gauss1d(cfg: &ScenarioConfig, params: &SamplerParams, out: &Path, files: &mut Vec<PathBuf>) -> CliResult<Value> {
    let m = gauss_model(cfg)?;
    let (oracle_var, oracle_cov) = gauss1d_oracle(cfg, &m);
    let half_width = 5.0 * oracle_var.max(target_variance(&m)).sqrt();
    let acc = gauss1d_ensemble(cfg, params, cfg.hist_bins, half_width)?;
    let mom = acc.joint.moments()?;
    let mean = acc.joint.mean();

    let oracle_y = oracle_cov.map(|c| c[1][1]);
    let rows = vec![
        vec!["x".into(), mean[0].to_string(), mom.cov_at(0, 0).to_string(), oracle_var.to_string()],
        vec![
            "y".into(),
            mean[1].to_string(),
            mom.cov_at(1, 1).to_string(),
            oracle_y.map_or(String::new(), |v| v.to_string()),
        ],
    ];
    let path = out.join("summary.csv");
    write_csv(&path, &["coordinate", "mean", "variance", "oracle_variance"], rows)?;
    files.push(path);

    let total = acc.joint.count() as f64;
    let tv = target_variance(&m);
    let hist_rows = acc.counts.iter().enumerate().map(|(i, &c)| {
        let lo = acc.lo + i as f64 * acc.width;
        let mid = lo + 0.5 * acc.width;
        let density = c as f64 / (total * acc.width);
        let target = (-mid * mid / (2.0 * tv)).exp() / (2.0 * std::f64::consts::PI * tv).sqrt();
        vec![lo.to_string(), (lo + acc.width).to_string(), c.to_string(), density.to_string(), target.to_string()]
    });
    let path = out.join("histogram.csv");
    write_csv(&path, &["bin_lo", "bin_hi", "count", "density", "target_density"], hist_rows)?;
    files.push(path);

    let frob_rel = oracle_cov.map(|c| {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                num += (mom.cov_at(i, j) - c[i][j]).powi(2);
                den += c[i][j].powi(2);
            }
        }
        (num / den).sqrt()
    });
    Ok(json!({
        "samples": acc.joint.count(),
        "mean_x": mean[0],
        "var_x": mom.cov_at(0, 0),
        "cov_xy": mom.cov_at(0, 1),
        "var_y": mom.cov_at(1, 1),
        "oracle_var_x": oracle_var,
        "target_var_x": tv,
        "covariance_rel_error": frob_rel,
    }))
}

// ---------------------------------------------------------------------------
// Two-pixel TV posterior

/// Prox-Sub samples at step `tau / reference_refinement`, run for the same
/// time as the sampled chains; the second half of each chain is recorded.
pub fn tv2pixel_reference(cfg: &ScenarioConfig) -> CliResult<EmpiricalMeasure> {
    let target = tv2pixel_target(cfg.observation, cfg.sigma_eps, cfg.alpha)?;
    let tau = resolve_tau(cfg)? / cfg.reference_refinement as f64;
    let total = cfg.n_steps * cfg.reference_refinement;
    let per_chain = cfg.reference_samples.div_ceil(cfg.reference_chains) as u64;
    let half = total / 2;
    let thinning = (half / per_chain.max(1)).max(1);
    let burn = total - thinning * (per_chain - 1);
    let run = RunConfig::new(cfg.reference_chains, total, burn, thinning);
    let params = SamplerParams::new(tau, cfg.lambda).with_seed(cfg.seed ^ 0x005e_ed0f_7e5e);
    let init = InitSpec::Point {
        x: cfg.observation.to_vec(),
        y: vec![0.0],
    };
    let store = run_ensemble(&target, &params, Method::ProxSub, &run, &init)?;
    let pts: Vec<Vec<f64>> = store.primal_samples().take(cfg.reference_samples).map(<[f64]>::to_vec).collect();
    Ok(EmpiricalMeasure::new(pts)?)
}

/// `n` points of `mu` at evenly spaced indices.
fn subsample(mu: &EmpiricalMeasure, n: usize) -> CliResult<EmpiricalMeasure> {
    let len = mu.len();
    let pts = (0..n).map(|i| mu.point(i * len / n).to_vec()).collect();
    Ok(EmpiricalMeasure::new(pts)?)
}

/// W2 between the ensemble and the reference at equidistant checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct W2Curve {
    pub times: Vec<f64>,
    pub w2: Vec<f64>,
}

impl W2Curve {
    pub fn last(&self) -> f64 {
        *self.w2.last().expect("at least one checkpoint")
    }

    /// Whether the mean of the last five checkpoints is within 10% of the
    /// mean of the five before them.
    pub fn plateaued(&self) -> bool {
        let n = self.w2.len();
        if n < 10 {
            return false;
        }
        let late: f64 = self.w2[n - 5..].iter().sum::<f64>() / 5.0;
        let early: f64 = self.w2[n - 10..n - 5].iter().sum::<f64>() / 5.0;
        (late - early).abs() <= 0.1 * late.max(early)
    }
}

pub fn tv2pixel_curve(cfg: &ScenarioConfig, params: &SamplerParams, reference: &EmpiricalMeasure) -> CliResult<W2Curve> {
    let target = tv2pixel_target(cfg.observation, cfg.sigma_eps, cfg.alpha)?;
    let stride = cfg.n_steps / cfg.checkpoints as u64;
    let run = RunConfig::new(cfg.n_chains, stride * cfg.checkpoints as u64, stride, stride);
    let init = InitSpec::Point {
        x: cfg.observation.to_vec(),
        y: vec![0.0],
    };
    let store = run_ensemble(&target, params, method_of(cfg.sampler), &run, &init)?;
    let n = cfg.w2_points.min(cfg.n_chains).min(reference.len());
    let reference = subsample(reference, n)?;
    let mut curve = W2Curve {
        times: Vec::new(),
        w2: Vec::new(),
    };
    for c in 0..cfg.checkpoints {
        let pts = store.chains.iter().take(n).map(|ch| ch[c].0.clone()).collect();
        let mu = EmpiricalMeasure::new(pts)?;
        curve.times.push(((c + 1) as u64 * stride) as f64 * params.tau);
        curve.w2.push(w2_exact(&mu, &reference, None)?);
    }
    Ok(curve)
}

fn run_tv2pixel(cfg: &ScenarioConfig, params: &SamplerParams, out: &Path, files: &mut Vec<PathBuf>) -> CliResult<Value> {
    let reference = tv2pixel_reference(cfg)?;
    let curve = tv2pixel_curve(cfg, params, &reference)?;
    let rows = curve
        .times
        .iter()
        .zip(&curve.w2)
        .enumerate()
        .map(|(i, (t, w))| vec![(i + 1).to_string(), t.to_string(), w.to_string()]);
    let path = out.join("w2_vs_time.csv");
    write_csv(&path, &["checkpoint", "time", "w2"], rows)?;
    files.push(path);
    Ok(json!({
        "final_w2": curve.last(),
        "plateaued": curve.plateaued(),
        "reference_samples": reference.len(),
    }))
}

// ---------------------------------------------------------------------------
// Image denoising

/// Statistics of an image posterior run.
#[derive(Clone, Debug)]
pub struct ImageRunSummary {
    pub psnr_noisy: f64,
    pub psnr_mmse: f64,
    /// Pixelwise primal variance averaged over pixels.
    pub mean_primal_variance: f64,
    /// Per-pixel sum of the dual component variances, averaged over pixels.
    pub mean_dual_dispersion: f64,
    pub noisy: ImageGrid,
    pub mmse: ImageGrid,
    pub variance: ImageGrid,
    pub dual_dispersion: ImageGrid,
}

pub fn image_run(cfg: &ScenarioConfig, params: &SamplerParams) -> CliResult<ImageRunSummary> {
    let (target, images) = build_target(cfg)?;
    let (clean, noisy) = images.ok_or_else(|| CliError::Config("not an image scenario".into()))?;
    let (w, h) = (clean.width(), clean.height());
    let n = w * h;
    let (d, m) = target.dims();
    let mut x0 = noisy.data().to_vec();
    x0.resize(d, 0.0);
    let init = InitSpec::Point { x: x0, y: vec![0.0; m] };
    let run = RunConfig::new(cfg.n_chains, cfg.burn_in + cfg.n_steps, cfg.burn_in, cfg.thinning);
    let (acc, _) = run_ensemble_with(&target, params, method_of(cfg.sampler), &run, &init, || {
        DiagonalMoments::new(d, m)
    })?;
    let var_x = acc.var_x()?;
    let var_y = acc.var_y()?;
    // Dual channels per pixel: 2 for TV; 2 + 3 for TGV, in two blocks.
    let blocks: &[usize] = if m == 2 * n { &[2] } else { &[2, 3] };
    let mut disp = vec![0.0; n];
    let mut offset = 0;
    for &g in blocks {
        for (p, acc_p) in disp.iter_mut().enumerate() {
            *acc_p += var_y[offset + g * p..offset + g * (p + 1)].iter().sum::<f64>();
        }
        offset += g * n;
    }
    let mmse = ImageGrid::new(w, h, acc.mean_x()[..n].to_vec())?;
    let variance = ImageGrid::new(w, h, var_x[..n].to_vec())?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ImageRunSummary {
        psnr_noisy: psnr(&clean, &noisy, 1.0)?,
        psnr_mmse: psnr(&clean, &mmse, 1.0)?,
        mean_primal_variance: mean(variance.data()),
        mean_dual_dispersion: mean(&disp),
        dual_dispersion: ImageGrid::new(w, h, disp)?,
        noisy,
        mmse,
        variance,
    })
}

const LOG_FLOOR: f64 = 1e-12;

fn run_image(cfg: &ScenarioConfig, params: &SamplerParams, out: &Path, files: &mut Vec<PathBuf>) -> CliResult<Value> {
    let s = image_run(cfg, params)?;
    for (name, img) in [
        ("noisy.pgm", s.noisy.clone()),
        ("mmse.pgm", s.mmse.clone()),
        ("variance_log10.pgm", s.variance.log10(LOG_FLOOR).normalized()),
        ("dual_dispersion_log10.pgm", s.dual_dispersion.log10(LOG_FLOOR).normalized()),
    ] {
        let path = out.join(name);
        save_image_pgm(&img, &path, u16::MAX)?;
        files.push(path);
    }
    let metrics = [
        ("psnr_noisy", s.psnr_noisy),
        ("psnr_mmse", s.psnr_mmse),
        ("mean_primal_variance", s.mean_primal_variance),
        ("mean_dual_dispersion", s.mean_dual_dispersion),
    ];
    let path = out.join("summary.csv");
    write_csv(&path, &["metric", "value"], metrics.iter().map(|(k, v)| vec![k.to_string(), v.to_string()]))?;
    files.push(path);
    Ok(metrics.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>().into())
}

// ---------------------------------------------------------------------------
// Sweeps on the 1D quadratic

fn run_sweep(cfg: &ScenarioConfig, out: &Path, files: &mut Vec<PathBuf>) -> CliResult<Value> {
    let m = gauss_model(cfg)?;
    let target = gauss1d_target(&m)?;
    let res = match cfg.sweep_kind {
        SweepKind::Tau => {
            let reference = match cfg.tau_ref {
                Some(tau_ref) => BiasReference::FineStep { tau_ref },
                None => BiasReference::Gaussian {
                    mean: 0.0,
                    var: stationary_cov_pd(&m)[0][0],
                },
            };
            let opts = SweepOptions {
                n_chains: cfg.n_chains,
                burn_in_time: cfg.burn_in_time,
                window_time: cfg.window_time,
                sample_every_time: cfg.sample_every_time,
                seed: cfg.seed,
                theta: cfg.theta,
                method: method_of(cfg.sampler),
                ..SweepOptions::default()
            };
            bias_sweep_tau(&target, cfg.lambda, &cfg.sweep_values, reference, &opts)?
        }
        SweepKind::Lambda => {
            let rule = match (cfg.tau, cfg.step_c) {
                (Some(t), _) => TauRule::Fixed(t),
                (None, Some(c)) => TauRule::ProductConstraint { k: cfg.k, c },
                (None, None) => return Err(CliError::Config("lambda sweeps need tau or step_c".into())),
            };
            let opts = LambdaSweepOptions {
                n_chains: cfg.n_chains,
                burn_in: cfg.burn_in,
                n_steps: cfg.n_steps,
                thinning: cfg.thinning,
                seed: cfg.seed,
                include_prox_sub: true,
                control_variate_curvature: Some(1.0 / cfg.c_g + cfg.k * cfg.k / cfg.c_f),
                ..LambdaSweepOptions::default()
            };
            lambda_sweep(&target, &cfg.sweep_values, rule, 0.0, target_variance(&m), &opts)?
        }
    };
    let path = out.join("sweep.csv");
    fs::write(&path, res.to_csv())?;
    files.push(path);
    Ok(json!({
        "slope": res.slope,
        "points": res.points.iter().map(|p| json!({
            "value": if p.value.is_finite() { json!(p.value) } else { json!("inf") },
            "tau": p.tau,
            "var": p.var,
            "w2": p.w2,
            "stationary": p.stationary,
        })).collect::<Vec<_>>(),
    }))
}
