use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdlangevin::analytic::{limiting_cov_pd, stationary_cov_mod, stationary_cov_pd, target_variance, GaussModel1D};
use pdlangevin_cli::config::Scenario;
use pdlangevin_cli::scenarios::{run_scenario, validate};
use pdlangevin_cli::{CliError, CliResult, ScenarioConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pdlangevin", version, about = "Primal-dual Langevin sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// `key=value` settings applied after the file.
        overrides: Vec<String>,
    },
    /// Run a step-size or step-ratio sweep on the 1D quadratic.
    Sweep { config: PathBuf, overrides: Vec<String> },
    /// Check a config and its step sizes without sampling.
    Validate { config: PathBuf, overrides: Vec<String> },
    /// Closed-form stationary covariances.
    Oracle {
        #[command(subcommand)]
        model: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    Gauss1d {
        #[arg(long, default_value_t = 1.0)]
        cf: f64,
        #[arg(long, default_value_t = 2.0)]
        cg: f64,
        #[arg(long, default_value_t = 1.5)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
}

fn load(path: &PathBuf, overrides: &[String]) -> CliResult<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::parse(&text)?;
    cfg.apply_overrides(overrides)?;
    Ok(cfg)
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let report = run_scenario(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Sweep { config, overrides } => {
            let mut cfg = load(&config, &overrides)?;
            cfg.scenario = Scenario::Sweep;
            let report = run_scenario(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Validate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let (r, p) = validate(&cfg)?;
            let out = json!({
                "tau": p.tau,
                "sigma": p.sigma(),
                "theta": p.theta,
                "operator_norm": r.operator_norm,
                "tau_sigma_l2": r.tau_sigma_l2,
                "stability_regime": r.stability_regime,
                "contraction_regime": r.contraction_regime,
                "bias_regime": r.bias_regime,
                "contraction_theta_min": r.contraction_theta_min,
                "bias_theta_min": r.bias_theta_min,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Oracle {
            model: Oracle::Gauss1d { cf, cg, k, lambda },
        } => {
            let m = GaussModel1D::new(cf, cg, k, lambda)?;
            let out = json!({
                "target_variance": target_variance(&m),
                "stationary_cov_pd": stationary_cov_pd(&m),
                "limiting_cov_pd": limiting_cov_pd(&m),
                "stationary_cov_mod": stationary_cov_mod(&m),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
