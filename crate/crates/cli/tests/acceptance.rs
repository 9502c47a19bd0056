//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use pdlangevin::analytic::{
    a_pd, b_pd, general_noise_primal_variance, lyapunov_cov, stationary_cov_mod, stationary_cov_pd, target_variance,
    GaussModel1D,
};
use pdlangevin::coupling::{
    bias_sweep_tau, fit_contraction_rate, lambda_sweep, log_log_slope, run_coupled_pair, BiasReference,
    LambdaSweepOptions, SweepOptions, TauRule,
};
use pdlangevin::linop::{dense, diff_pair, grad2d, scalar_map, sym_grad2d, tgv_block};
use pdlangevin::metrics::{w2_1d, w2_exact, EmpiricalMeasure, WeightedNorm};
use pdlangevin::problems::{gauss1d_target, tv2pixel_target};
use pdlangevin::prox::{prox_via_moreau, ProxOperator};
use pdlangevin::{
    run_ensemble, validate_params, ChainState, InitSpec, LinearMap, Method, RunConfig, SamplerParams, TargetSpec,
};
use pdlangevin_cli::config::{SamplerKind, Scenario};
use pdlangevin_cli::scenarios::{gauss1d_moments, image_run, sampler_params, tv2pixel_curve, tv2pixel_reference};
use pdlangevin_cli::{gauss1d_stepsizes, ScenarioConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Deterministic uniform draws on `[0, 1)`.
struct Xorshift(u64);

impl Xorshift {
    fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    fn vec(&mut self, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| self.range(-scale, scale)).collect()
    }
}

fn model(lambda: f64) -> GaussModel1D {
    GaussModel1D::new(1.0, 2.0, 1.5, lambda).unwrap()
}

/// Stationary covariance of the ULPDA recursion on the 1D quadratic, as
/// `(var x, cov xy, var y)`, from `S = A S A^T + b b^T` solved by doubling.
fn discrete_oracle(m: &GaussModel1D, tau: f64, inner: bool) -> (f64, f64, f64) {
    let sigma = m.lambda * tau;
    let dy = 1.0 / (1.0 + sigma * m.c_f);
    let dx = 1.0 / (1.0 + tau / m.c_g);
    let ay = [2.0 * dy * sigma * m.k, dy, -dy * sigma * m.k];
    let ax = [dx * (1.0 - tau * m.k * ay[0]), -dx * tau * m.k * ay[1], -dx * tau * m.k * ay[2]];
    let a = [ax, ay, [1.0, 0.0, 0.0]];
    let noise = if inner { dx * (2.0 * tau).sqrt() } else { (2.0 * tau).sqrt() };
    let mut s = [[0.0; 3]; 3];
    s[0][0] = noise * noise;
    let mut p = a;
    let mul = |a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]| {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    };
    for _ in 0..64 {
        let mut pt = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                pt[i][j] = p[j][i];
            }
        }
        let add = mul(&mul(&p, &s), &pt);
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] += add[i][j];
            }
        }
        p = mul(&p, &p);
    }
    (s[0][0], s[0][1], s[1][1])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// ---------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = Xorshift::new(1);
    let mut worst_pd: f64 = 0.0;
    let mut worst_gen: f64 = 0.0;
    for _ in 0..200 {
        let m = GaussModel1D::new(
            rng.range(0.1, 5.0),
            rng.range(0.1, 5.0),
            rng.range(0.2, 3.0) * if rng.uniform() < 0.5 { -1.0 } else { 1.0 },
            rng.range(0.05, 50.0),
        )
        .unwrap();
        let closed = stationary_cov_pd(&m);
        let lyap = lyapunov_cov(a_pd(&m), &[b_pd()]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                worst_pd = worst_pd.max(rel(closed[i][j], lyap[i][j]));
            }
        }
        let b: Vec<f64> = rng.vec(4, 2.0);
        let gen = general_noise_primal_variance(&m, b[0], b[1], b[2], b[3]);
        let lyap = lyapunov_cov(a_pd(&m), &[[b[0], b[2]], [b[1], b[3]]]).unwrap();
        worst_gen = worst_gen.max(rel(gen, lyap[0][0]));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst_pd < 1e-10 && worst_gen < 1e-10 && secs < 1.0,
        format!("max rel err closed form {worst_pd:.1e}, general noise {worst_gen:.1e}, {secs:.3}s"),
    )
}

fn criterion_2() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for lambda in [1.0, 10.0, 100.0] {
        let (tau, _) = gauss1d_stepsizes(lambda, 1.5, 1e-4).unwrap();
        let cfg = ScenarioConfig {
            scenario: Scenario::Gauss1d,
            sampler: SamplerKind::UlpdaOuter,
            tau: Some(tau),
            lambda,
            n_chains: 10_000,
            n_steps: 10_000,
            burn_in: 10_000,
            thinning: 10,
            seed: 2024,
            ..ScenarioConfig::default()
        };
        let p = sampler_params(&cfg, (1, 1)).unwrap();
        let mom = gauss1d_moments(&cfg, &p).unwrap().moments().unwrap();
        let c = stationary_cov_pd(&model(lambda));
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                num += (mom.cov_at(i, j) - c[i][j]).powi(2);
                den += c[i][j].powi(2);
            }
        }
        let err = (num / den).sqrt();
        ok &= err < 0.03;
        details.push(format!("lambda={lambda}: var_x {:.4} (oracle {:.4}), frob rel {err:.4}", mom.cov_at(0, 0), c[0][0]));
    }
    check(ok, details.join("; "))
}

fn criterion_3() -> Outcome {
    let m = model(1.0);
    let t = gauss1d_target(&m).unwrap();
    let opts = LambdaSweepOptions {
        n_chains: 200,
        burn_in: 5000,
        n_steps: 50_000,
        thinning: 10,
        seed: 3,
        include_prox_sub: true,
        control_variate_curvature: Some(1.0 / m.c_g + m.k * m.k / m.c_f),
        ..LambdaSweepOptions::default()
    };
    let lambdas = [1.0, 10.0, 100.0, 1000.0];
    let res = lambda_sweep(&t, &lambdas, TauRule::Fixed(1e-3), 0.0, target_variance(&m), &opts).unwrap();
    let w: Vec<f64> = res.points.iter().map(|p| p.w2).collect();
    let decreasing = w[..4].windows(2).all(|p| p[1] < p[0]);
    let ratio = w[3] / w[4];
    let oracle: Vec<String> = lambdas
        .iter()
        .map(|&l| {
            let v = discrete_oracle(&model(l), 1e-3, false).0;
            format!("{:.2e}", (v.sqrt() - target_variance(&m).sqrt()).abs())
        })
        .collect();
    check(
        decreasing && (0.5..=2.0).contains(&ratio),
        format!(
            "W2 {:?} prox-sub {:.2e} (discrete oracle {}), lambda=1000 / prox-sub = {ratio:.3}",
            w[..4].iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            w[4],
            oracle.join(", ")
        ),
    )
}

/// `g = |x|^2 / 3`, `f = 0.4 |w|^2` with a fixed dense `K` (4 x 3).
fn quadratic_3d() -> TargetSpec {
    let k = dense(4, 3, vec![1.0, -0.5, 0.2, 0.3, 0.8, -1.1, -0.7, 0.4, 0.9, 0.1, 0.6, 0.5]).unwrap();
    TargetSpec::new(ProxOperator::scaled_square(1.5).unwrap(), ProxOperator::scaled_square(1.0 / 0.8).unwrap(), k).unwrap()
}

fn random_state(rng: &mut Xorshift, d: usize, m: usize, scale: f64) -> ChainState {
    ChainState::new(rng.vec(d, scale), rng.vec(m, scale))
}

fn criterion_4() -> Outcome {
    let t = quadratic_3d();
    let mut rng = Xorshift::new(4);
    let mut violations = 0;
    let mut runs = 0;
    let mut worst_rate_gap = f64::NEG_INFINITY;
    for &(tau, lambda) in &[(0.05, 2.0), (0.2, 0.5), (0.01, 30.0)] {
        let base = SamplerParams::new(tau, lambda);
        let theta = validate_params(&t, &base.clone().with_theta(0.999)).unwrap().contraction_theta_min;
        for seed in 0..20 {
            let p = base.clone().with_theta(theta).with_seed(seed);
            let (a, b) = (random_state(&mut rng, 3, 4, 3.0), random_state(&mut rng, 3, 4, 3.0));
            let tr = run_coupled_pair(&t, &p, a, b, 300).unwrap();
            // Below this level both chains agree to rounding error.
            let floor = 1e3 * f64::EPSILON.powi(2) * 36.0 / p.sigma().min(tau);
            violations += tr.contraction_violations(1e-9, floor).len();
            worst_rate_gap = worst_rate_gap.max(fit_contraction_rate(&tr, 0).unwrap() - theta.ln());
            runs += 1;
        }
    }
    let convex = tv2pixel_target([0.5, -0.5], 0.6, 2.0).unwrap();
    let mut stability = 0;
    let mut worst_joint: f64 = 0.0;
    for &(tau, lambda) in &[(0.1, 10.0), (0.3, 1.0), (0.02, 1000.0)] {
        for seed in 0..20 {
            let p = SamplerParams::new(tau, lambda).with_seed(seed);
            let (a, b) = (random_state(&mut rng, 2, 1, 4.0), random_state(&mut rng, 2, 1, 4.0));
            let tr = run_coupled_pair(&convex, &p, a, b, 500).unwrap();
            stability += tr.stability_violations(1e-12).len();
            worst_joint = worst_joint.max(tr.max_joint_ratio() / tr.joint_constant());
        }
    }
    check(
        violations == 0 && stability == 0 && worst_joint <= 1.0 + 1e-12 && worst_rate_gap <= 1e-3,
        format!(
            "{runs} contraction runs: {violations} step violations, fitted rate - ln theta <= {worst_rate_gap:.2e}; \
             60 convex runs: {stability} stability violations, max terminal ratio / C = {worst_joint:.3}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let t = gauss1d_target(&model(10.0)).unwrap();
    let taus = [4e-3, 2e-3, 1e-3, 5e-4];
    let opts = SweepOptions {
        n_chains: 2000,
        burn_in_time: 2.0,
        window_time: 2.0,
        sample_every_time: 0.004,
        seed: 5,
        ..SweepOptions::default()
    };
    let tau_ref = 6.25e-5;
    let res = bias_sweep_tau(&t, 10.0, &taus, BiasReference::FineStep { tau_ref }, &opts).unwrap();
    let oracle_w2: Vec<f64> = taus
        .iter()
        .map(|&tau| {
            let v = discrete_oracle(&model(10.0), tau, false).0;
            (v.sqrt() - discrete_oracle(&model(10.0), tau_ref, false).0.sqrt()).abs()
        })
        .collect();
    let oracle_slope = log_log_slope(&taus, &oracle_w2);
    check(
        (res.slope - 1.0).abs() <= 0.3,
        format!(
            "W2 {:?}, slope {:.3} (discrete oracle slope {oracle_slope:.3})",
            res.points.iter().map(|p| format!("{:.2e}", p.w2)).collect::<Vec<_>>(),
            res.slope
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut vars = Vec::new();
    for sampler in [SamplerKind::UlpdaOuter, SamplerKind::UlpdaInner] {
        let cfg = ScenarioConfig {
            sampler,
            tau: Some(1e-3),
            lambda: 1.0,
            n_chains: 1000,
            n_steps: 50_000,
            burn_in: 10_000,
            thinning: 10,
            seed: 6,
            ..ScenarioConfig::default()
        };
        let p = sampler_params(&cfg, (1, 1)).unwrap();
        vars.push(gauss1d_moments(&cfg, &p).unwrap().moments().unwrap().cov_at(0, 0));
    }
    let diff = rel(vars[1], vars[0]);
    let (o, i) = (discrete_oracle(&model(1.0), 1e-3, false).0, discrete_oracle(&model(1.0), 1e-3, true).0);
    check(
        diff < 0.02,
        format!("outer {:.4}, inner {:.4}, rel diff {diff:.4} (oracle {:.4} vs {:.4})", vars[0], vars[1], o, i),
    )
}

fn criterion_7() -> Outcome {
    let cfg = ScenarioConfig {
        sampler: SamplerKind::ModifiedSde,
        tau: Some(1e-4),
        lambda: 10.0,
        n_chains: 100,
        n_steps: 1_000_000,
        burn_in: 100_000,
        thinning: 100,
        seed: 7,
        ..ScenarioConfig::default()
    };
    let p = sampler_params(&cfg, (1, 1)).unwrap();
    let mom = gauss1d_moments(&cfg, &p).unwrap().moments().unwrap();
    let c = stationary_cov_mod(&model(10.0));
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            num += (mom.cov_at(i, j) - c[i][j]).powi(2);
            den += c[i][j].powi(2);
        }
    }
    let err = (num / den).sqrt();
    let primal_ok = rel(mom.cov_at(0, 0), target_variance(&model(10.0))) < 0.05;
    check(
        err < 0.05 && primal_ok,
        format!(
            "cov [[{:.4}, {:.4}], [., {:.4}]] vs [[{:.4}, {:.4}], [., {:.4}]], frob rel {err:.4}",
            mom.cov_at(0, 0),
            mom.cov_at(0, 1),
            mom.cov_at(1, 1),
            c[0][0],
            c[0][1],
            c[1][1]
        ),
    )
}

fn criterion_8() -> Outcome {
    let base = ScenarioConfig {
        scenario: Scenario::Tv2pixel,
        tau: Some(1e-3),
        sigma_eps: 1.0,
        alpha: 10.0,
        observation: [0.0, 0.0],
        n_chains: 1000,
        n_steps: 4000,
        seed: 8,
        ..ScenarioConfig::default()
    };
    let reference = tv2pixel_reference(&base).unwrap();
    let mut finals = Vec::new();
    let mut plateau = true;
    for (sampler, lambda) in [
        (SamplerKind::ProxSub, 1000.0),
        (SamplerKind::UlpdaOuter, 1000.0),
        (SamplerKind::UlpdaOuter, 100.0),
        (SamplerKind::UlpdaOuter, 10.0),
    ] {
        let cfg = ScenarioConfig { sampler, lambda, ..base.clone() };
        let p = sampler_params(&cfg, (2, 1)).unwrap();
        let curve = tv2pixel_curve(&cfg, &p, &reference).unwrap();
        plateau &= curve.plateaued();
        finals.push(curve.last());
    }
    let ordered = finals.windows(2).all(|w| w[0] < w[1]);
    check(
        ordered && plateau && reference.len() == 100_000,
        format!(
            "final W2 prox-sub {:.3} < lambda=1000 {:.3} < lambda=100 {:.3} < lambda=10 {:.3}; plateau {plateau}",
            finals[0], finals[1], finals[2], finals[3]
        ),
    )
}

fn criterion_9() -> Outcome {
    let base = ScenarioConfig {
        scenario: Scenario::TvImage,
        tau: Some(0.005),
        sigma_eps: 0.25,
        alpha: 5.0,
        width: 32,
        height: 32,
        n_chains: 16,
        burn_in: 4000,
        n_steps: 8000,
        thinning: 10,
        seed: 9,
        ..ScenarioConfig::default()
    };
    let mut rows = Vec::new();
    for (sampler, lambda) in [
        (SamplerKind::UlpdaOuter, 1.0),
        (SamplerKind::UlpdaOuter, 10.0),
        (SamplerKind::UlpdaOuter, 100.0),
        (SamplerKind::ProxSub, 100.0),
    ] {
        let cfg = ScenarioConfig { sampler, lambda, ..base.clone() };
        let p = sampler_params(&cfg, (1024, 2048)).unwrap();
        rows.push(image_run(&cfg, &p).unwrap());
    }
    let primal: Vec<f64> = rows.iter().map(|r| r.mean_primal_variance).collect();
    let dual: Vec<f64> = rows.iter().map(|r| r.mean_dual_dispersion).collect();
    let gains: Vec<f64> = rows.iter().map(|r| r.psnr_mmse - r.psnr_noisy).collect();
    check(
        primal.windows(2).all(|w| w[0] > w[1]) && dual.windows(2).all(|w| w[0] < w[1]) && gains.iter().all(|g| *g >= 5.0),
        format!(
            "primal var {:?}, dual dispersion {:?}, PSNR gain dB {:?} (noisy {:.2} dB)",
            primal.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            dual.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
            gains.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>(),
            rows[0].psnr_noisy
        ),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let mut rng = Xorshift::new(10);
    let mut failures = Vec::new();

    // Firm nonexpansiveness, 1000 random pairs per operator.
    let n = 6;
    let ops = vec![
        ProxOperator::identity(),
        ProxOperator::scaled_square(0.7).unwrap(),
        ProxOperator::quadratic_data(rng.vec(n, 2.0), 0.3).unwrap(),
        ProxOperator::interval(1.3).unwrap(),
        ProxOperator::group_ball(0.8, 2).unwrap(),
        ProxOperator::blocks(vec![(2, ProxOperator::scaled_square(2.0).unwrap()), (4, ProxOperator::group_ball(0.5, 2).unwrap())])
            .unwrap(),
    ];
    for op in &ops {
        for _ in 0..1000 {
            let (u, v, gamma) = (rng.vec(n, 5.0), rng.vec(n, 5.0), rng.range(0.01, 10.0));
            let (pu, pv) = (op.eval(&u, gamma).unwrap(), op.eval(&v, gamma).unwrap());
            let d: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a - b).collect();
            let e: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            if dot(&d, &d) > dot(&d, &e) + 1e-12 * (1.0 + dot(&e, &e)) {
                failures.push(format!("firm nonexpansiveness of {}", op.label()));
                break;
            }
        }
    }

    // Moreau identity for (alpha |.|, interval) and (alpha |.|_{2,1}, group ball).
    let alpha = 0.9;
    for _ in 0..500 {
        let (v, gamma) = (rng.vec(n, 4.0), rng.range(0.05, 5.0));
        let via = prox_via_moreau(&ProxOperator::interval(alpha).unwrap(), &v, gamma).unwrap();
        let soft = v.iter().map(|x| x.signum() * (x.abs() - gamma * alpha).max(0.0));
        let via_g = prox_via_moreau(&ProxOperator::group_ball(alpha, 2).unwrap(), &v, gamma).unwrap();
        let shrink = v.chunks(2).flat_map(|g| {
            let norm = dot(g, g).sqrt();
            let s = if norm > 0.0 { (1.0 - gamma * alpha / norm).max(0.0) } else { 0.0 };
            g.iter().map(move |x| s * x).collect::<Vec<_>>()
        });
        if via.iter().zip(soft).any(|(a, b)| (a - b).abs() > 1e-12) || via_g.iter().zip(shrink).any(|(a, b)| (a - b).abs() > 1e-12) {
            failures.push("Moreau identity".into());
            break;
        }
    }

    // Adjointness, 100 random pairs per operator.
    let maps: Vec<LinearMap> = vec![
        grad2d(7, 5).unwrap(),
        sym_grad2d(6, 4).unwrap(),
        tgv_block(5, 5, sym_grad2d(5, 5).unwrap()).unwrap(),
        diff_pair(),
        scalar_map(-1.7),
        dense(3, 4, rng.vec(12, 1.0)).unwrap(),
    ];
    for k in &maps {
        let (d, m) = k.dims();
        for _ in 0..100 {
            let (x, y) = (rng.vec(d, 1.0), rng.vec(m, 1.0));
            let (lhs, rhs) = (dot(&k.apply(&x).unwrap(), &y), dot(&x, &k.adjoint(&y).unwrap()));
            if (lhs - rhs).abs() > 1e-10 * (lhs.abs() + rhs.abs()).max(1e-300) {
                failures.push(format!("adjointness of a {d}x{m} map"));
                break;
            }
        }
    }

    // W2 metric axioms and agreement of the 1D solvers.
    let norm = WeightedNorm::new(1.0, 0.1, 1).unwrap();
    for _ in 0..100 {
        let cloud = |rng: &mut Xorshift| EmpiricalMeasure::new((0..8).map(|_| rng.vec(2, 3.0)).collect()).unwrap();
        let (a, b, c) = (cloud(&mut rng), cloud(&mut rng), cloud(&mut rng));
        for w in [None, Some(&norm)] {
            let ab = w2_exact(&a, &b, w).unwrap();
            let ok = w2_exact(&a, &a, w).unwrap() < 1e-12
                && (ab - w2_exact(&b, &a, w).unwrap()).abs() < 1e-12
                && w2_exact(&a, &c, w).unwrap() <= ab + w2_exact(&b, &c, w).unwrap() + 1e-9;
            if !ok {
                failures.push("W2 metric axioms".into());
            }
        }
        let p = EmpiricalMeasure::from_scalars(rng.vec(9, 3.0)).unwrap();
        let q = EmpiricalMeasure::from_scalars(rng.vec(9, 3.0)).unwrap();
        if (w2_1d(&p, &q).unwrap() - w2_exact(&p, &q, None).unwrap()).abs() > 1e-12 {
            failures.push("1D W2 agreement".into());
        }
    }

    // Ensemble determinism across repeated runs and worker counts.
    let t = tv2pixel_target([0.2, -0.4], 0.7, 1.5).unwrap();
    let run = RunConfig::new(8, 300, 50, 7);
    let init = InitSpec::Gaussian {
        x_mean: vec![0.0, 0.0],
        y_mean: vec![0.0],
        std: 0.5,
    };
    for method in [Method::Ulpda, Method::ProxSub] {
        let p = SamplerParams::new(0.05, 4.0).with_seed(77);
        let base = run_ensemble(&t, &p, method, &run, &init).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            if pool.install(|| run_ensemble(&t, &p, method, &run, &init).unwrap()) != base {
                failures.push(format!("determinism of {}", method.name()));
            }
        }
    }

    failures.dedup();
    let secs = start.elapsed().as_secs_f64();
    if secs >= 30.0 {
        failures.push(format!("took {secs:.1}s"));
    }
    check(failures.is_empty(), format!("{secs:.2}s; failures: {failures:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Gaussian oracle identity", criterion_1),
        ("sampler vs oracle covariance", criterion_2),
        ("lambda monotonicity", criterion_3),
        ("discrete contraction", criterion_4),
        ("bias scaling in tau", criterion_5),
        ("noise placement equivalence", criterion_6),
        ("modified SDE covariance", criterion_7),
        ("two-pixel TV ordering", criterion_8),
        ("image dispersion signatures", criterion_9),
        ("property suites", criterion_10),
    ];
    // `cargo test -- <filter>` selects criteria by number or name.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filters.is_empty() && !filters.iter().any(|s| id.ends_with(&format!(" {s}")) || name.contains(s.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("{id} ({name}): PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("{id} ({name}): FAIL [{secs:.1}s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
