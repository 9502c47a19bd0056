//! Flat `key = value` scenario files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Gauss1d,
    Tv2pixel,
    TvImage,
    TgvImage,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    UlpdaOuter,
    UlpdaInner,
    UlpdaGeneral,
    Ula,
    ProxSub,
    ModifiedSde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Tau,
    Lambda,
}

macro_rules! keyword_enum {
    ($ty:ident { $($name:literal => $variant:ident),* $(,)? }) => {
        impl FromStr for $ty {
            type Err = CliError;
            fn from_str(s: &str) -> CliResult<Self> {
                match s {
                    $($name => Ok($ty::$variant),)*
                    _ => Err(CliError::Config(format!(
                        "unknown {} '{s}' (expected one of: {})",
                        stringify!($ty),
                        [$($name),*].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)* })
            }
        }
    };
}

keyword_enum!(Scenario {
    "gauss1d" => Gauss1d,
    "tv2pixel" => Tv2pixel,
    "tv_image" => TvImage,
    "tgv_image" => TgvImage,
    "sweep" => Sweep,
});

keyword_enum!(SamplerKind {
    "ulpda_outer" => UlpdaOuter,
    "ulpda_inner" => UlpdaInner,
    "ulpda_general" => UlpdaGeneral,
    "ula" => Ula,
    "prox_sub" => ProxSub,
    "modified_sde" => ModifiedSde,
});

keyword_enum!(SweepKind {
    "tau" => Tau,
    "lambda" => Lambda,
});

/// Every setting of one experiment. Unset optional fields fall back to the
/// documented defaults when the scenario runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub sampler: SamplerKind,
    pub tau: Option<f64>,
    pub lambda: f64,
    pub theta: f64,
    /// TV weight; also the default TGV weight `alpha0`.
    pub alpha: f64,
    pub alpha0: Option<f64>,
    /// Defaults to `alpha0 / 2`.
    pub alpha1: Option<f64>,
    pub sigma_eps: f64,
    pub n_chains: usize,
    pub n_steps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
    pub input_image: Option<PathBuf>,
    pub output_dir: PathBuf,

    /// Quadratic model `f(y) = y^2/(2 c_f)`, `g(x) = x^2/(2 c_g)`, `K = k`.
    pub c_f: f64,
    pub c_g: f64,
    pub k: f64,
    /// When set, `tau` and `sigma` solve `sigma/tau = lambda`, `sigma tau k^2 = step_c`.
    pub step_c: Option<f64>,
    pub hist_bins: usize,

    /// Noisy observation of the two-pixel problem.
    pub observation: [f64; 2],
    pub checkpoints: usize,
    pub w2_points: usize,
    pub reference_chains: usize,
    pub reference_samples: usize,
    /// Fine-step factor of the Prox-Sub reference.
    pub reference_refinement: u64,

    /// Synthetic phantom size when no input image is given.
    pub width: usize,
    pub height: usize,

    /// Generalized noise coefficients, row-major `d x (d+m)` and `m x (d+m)`.
    pub noise_bx: Option<Vec<f64>>,
    pub noise_by: Option<Vec<f64>>,

    pub sweep_kind: SweepKind,
    pub sweep_values: Vec<f64>,
    /// Fine step of the coupled reference in step-size sweeps.
    pub tau_ref: Option<f64>,
    /// Step-size sweeps measure their budget in continuous time.
    pub burn_in_time: f64,
    pub window_time: f64,
    pub sample_every_time: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Gauss1d,
            sampler: SamplerKind::UlpdaOuter,
            tau: None,
            lambda: 1.0,
            theta: 1.0,
            alpha: 10.0,
            alpha0: None,
            alpha1: None,
            sigma_eps: 0.25,
            n_chains: 100,
            n_steps: 10_000,
            burn_in: 1000,
            thinning: 1,
            seed: 0,
            input_image: None,
            output_dir: PathBuf::from("out"),
            c_f: 1.0,
            c_g: 2.0,
            k: 1.5,
            step_c: None,
            hist_bins: 60,
            observation: [0.0, 0.0],
            checkpoints: 20,
            w2_points: 1000,
            reference_chains: 1000,
            reference_samples: 100_000,
            reference_refinement: 16,
            width: 32,
            height: 32,
            noise_bx: None,
            noise_by: None,
            sweep_kind: SweepKind::Tau,
            sweep_values: Vec::new(),
            tau_ref: None,
            burn_in_time: 2.0,
            window_time: 2.0,
            sample_every_time: 0.01,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value '{value}' for '{key}'")))
}

fn list(key: &str, value: &str) -> CliResult<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl ScenarioConfig {
    /// Parses a config file body. Lines are `key = value`; `#` starts a comment.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        Ok(cfg)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> CliResult<()> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override '{o}' is not key=value")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "scenario" => self.scenario = value.parse()?,
            "sampler" => self.sampler = value.parse()?,
            "tau" => self.tau = Some(num(key, value)?),
            "lambda" => self.lambda = num(key, value)?,
            "theta" => self.theta = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "alpha0" => self.alpha0 = Some(num(key, value)?),
            "alpha1" => self.alpha1 = Some(num(key, value)?),
            "sigma_eps" => self.sigma_eps = num(key, value)?,
            "n_chains" => self.n_chains = num(key, value)?,
            "n_steps" => self.n_steps = num(key, value)?,
            "burn_in" => self.burn_in = num(key, value)?,
            "thinning" => self.thinning = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "input_image" => self.input_image = (!value.is_empty()).then(|| PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "c_f" => self.c_f = num(key, value)?,
            "c_g" => self.c_g = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "step_c" => self.step_c = Some(num(key, value)?),
            "hist_bins" => self.hist_bins = num(key, value)?,
            "observation" => {
                let v = list(key, value)?;
                self.observation = v
                    .try_into()
                    .map_err(|_| CliError::Config("observation needs exactly two values".into()))?;
            }
            "checkpoints" => self.checkpoints = num(key, value)?,
            "w2_points" => self.w2_points = num(key, value)?,
            "reference_chains" => self.reference_chains = num(key, value)?,
            "reference_samples" => self.reference_samples = num(key, value)?,
            "reference_refinement" => self.reference_refinement = num(key, value)?,
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "noise_bx" => self.noise_bx = Some(list(key, value)?),
            "noise_by" => self.noise_by = Some(list(key, value)?),
            "sweep_kind" => self.sweep_kind = value.parse()?,
            "sweep_values" => self.sweep_values = list(key, value)?,
            "tau_ref" => self.tau_ref = Some(num(key, value)?),
            "burn_in_time" => self.burn_in_time = num(key, value)?,
            "window_time" => self.window_time = num(key, value)?,
            "sample_every_time" => self.sample_every_time = num(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0.unwrap_or(self.alpha)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1.unwrap_or(0.5 * self.alpha0())
    }

    /// Checks values that do not depend on the target.
    pub fn validate(&self) -> CliResult<()> {
        let positive = [
            ("lambda", self.lambda),
            ("theta", self.theta),
            ("alpha", self.alpha),
            ("alpha0", self.alpha0()),
            ("alpha1", self.alpha1()),
            ("sigma_eps", self.sigma_eps),
            ("c_f", self.c_f),
            ("c_g", self.c_g),
            ("burn_in_time", self.burn_in_time),
            ("window_time", self.window_time),
            ("sample_every_time", self.sample_every_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("tau must be positive, got {t}")));
            }
        }
        if self.theta > 1.0 {
            return Err(CliError::Config(format!("theta must not exceed 1, got {}", self.theta)));
        }
        if self.k == 0.0 || !self.k.is_finite() {
            return Err(CliError::Config("k must be finite and nonzero".into()));
        }
        let counts = [
            ("n_chains", self.n_chains),
            ("thinning", self.thinning as usize),
            ("hist_bins", self.hist_bins),
            ("checkpoints", self.checkpoints),
            ("w2_points", self.w2_points),
            ("reference_chains", self.reference_chains),
            ("reference_samples", self.reference_samples),
            ("reference_refinement", self.reference_refinement as usize),
            ("width", self.width),
            ("height", self.height),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.n_steps == 0 {
            return Err(CliError::Config("n_steps must be at least 1".into()));
        }
        if self.tau.is_none() && !(self.scenario == Scenario::Gauss1d && self.step_c.is_some()) && self.scenario != Scenario::Sweep {
            return Err(CliError::Config("tau is required (or step_c for gauss1d)".into()));
        }
        match self.scenario {
            Scenario::Gauss1d | Scenario::Sweep if !self.observation.iter().all(|v| v.is_finite()) => {
                Err(CliError::Config("observation must be finite".into()))
            }
            Scenario::Tv2pixel if self.n_steps < self.checkpoints as u64 => {
                Err(CliError::Config("n_steps must be at least the number of checkpoints".into()))
            }
            Scenario::Sweep if self.sweep_values.is_empty() => Err(CliError::Config("sweep_values is empty".into())),
            Scenario::Sweep if self.sweep_kind == SweepKind::Lambda && self.tau.is_none() && self.step_c.is_none() => {
                Err(CliError::Config("lambda sweeps need tau or step_c".into()))
            }
            _ => Ok(()),
        }
    }
}

fn strip(e: CliError) -> String {
    match e {
        CliError::Config(s) | CliError::Regime(s) | CliError::Io(s) | CliError::Other(s) => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blank_lines_and_lists() {
        let cfg = ScenarioConfig::parse(
            "# header\nscenario = tv2pixel\n\nsampler=prox_sub  # baseline\ntau = 1e-3\nobservation = 0.5, -0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, Scenario::Tv2pixel);
        assert_eq!(cfg.sampler, SamplerKind::ProxSub);
        assert_eq!(cfg.tau, Some(1e-3));
        assert_eq!(cfg.observation, [0.5, -0.5]);
        assert_eq!(cfg.alpha, 10.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_win() {
        let mut cfg = ScenarioConfig::parse("tau = 0.1\nlambda = 2").unwrap();
        cfg.apply_overrides(&["lambda=7", "seed = 3"]).unwrap();
        assert_eq!((cfg.lambda, cfg.seed), (7.0, 3));
        assert!(cfg.apply_overrides(&["lambda"]).is_err());
    }

    #[test]
    fn tgv_weights_default_to_half_ratio() {
        let cfg = ScenarioConfig::parse("alpha = 4").unwrap();
        assert_eq!((cfg.alpha0(), cfg.alpha1()), (4.0, 2.0));
        let cfg = ScenarioConfig::parse("alpha0 = 3\nalpha1 = 1").unwrap();
        assert_eq!((cfg.alpha0(), cfg.alpha1()), (3.0, 1.0));
    }

    #[test]
    fn errors_name_the_problem() {
        let e = ScenarioConfig::parse("tau = 0.1\nbogus = 1").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("bogus"), "{e}");
        let e = ScenarioConfig::parse("sampler = gibbs").unwrap_err().to_string();
        assert!(e.contains("gibbs") && e.contains("ulpda_outer"), "{e}");
        assert!(ScenarioConfig::parse("tau = abc").is_err());
        assert!(ScenarioConfig::parse("just words").is_err());
        assert_eq!(ScenarioConfig::parse("tau = 1").unwrap().scenario.to_string(), "gauss1d");
    }

    #[test]
    fn validation_rejects_nonpositive_and_missing_values() {
        let ok = ScenarioConfig::parse("tau = 0.01").unwrap();
        ok.validate().unwrap();
        for bad in ["lambda = 0", "tau = -1", "theta = 1.5", "n_chains = 0", "sigma_eps = -0.1", "k = 0"] {
            let mut c = ok.clone();
            c.apply_overrides(&[bad]).unwrap();
            assert!(matches!(c.validate(), Err(CliError::Config(_))), "{bad}");
        }
        assert!(ScenarioConfig::default().validate().is_err());
        let c = ScenarioConfig::parse("step_c = 1e-4").unwrap();
        c.validate().unwrap();
        let c = ScenarioConfig::parse("scenario = sweep").unwrap();
        assert!(c.validate().is_err());
    }
}
