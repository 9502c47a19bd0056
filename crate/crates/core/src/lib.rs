//! Primal-dual Langevin sampling for targets `exp(-f(Kx) - g(x))`.
//!
//! The crate provides proximal operators ([`prox`]), matrix-free linear
//! operators ([`linop`]), the chain update rules ([`samplers`]), closed-form
//! Gaussian oracles ([`analytic`]), distances between sample clouds
//! ([`metrics`]), coupled-chain harnesses ([`coupling`]), image helpers
//! ([`image`]) and ready-made targets ([`problems`]).

pub mod analytic;
pub mod coupling;
pub mod error;
pub mod image;
pub mod linop;
pub mod metrics;
pub mod problems;
pub mod prox;
pub mod samplers;

pub use error::{Error, Result};
pub use image::ImageGrid;
pub use linop::LinearMap;
pub use prox::ProxOperator;
pub use samplers::{
    run_ensemble, validate_params, ChainState, InitSpec, Method, NoiseVariant, RunConfig, SampleStore,
    SamplerParams, TargetSpec,
};
