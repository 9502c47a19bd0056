//! Experiment driver for the primal-dual Langevin samplers.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};

/// Step sizes with `sigma / tau = lambda` and `sigma tau k^2 = c`.
pub fn gauss1d_stepsizes(lambda: f64, k: f64, c: f64) -> CliResult<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CliError::Config(format!("lambda must be positive, got {lambda}")));
    }
    if k == 0.0 || !k.is_finite() {
        return Err(CliError::Config("k must be finite and nonzero".into()));
    }
    if !(c > 0.0) {
        return Err(CliError::Config(format!("step constant must be positive, got {c}")));
    }
    if c > 1.0 {
        return Err(CliError::Regime(format!("step constant {c} exceeds 1")));
    }
    let tau = (c / lambda).sqrt() / k.abs();
    let sigma = (c * lambda).sqrt() / k.abs();
    Ok((tau, sigma))
}
