//! Bayesian inference of the realized stochastic volatility (RSV) model
//! with Hybrid Monte Carlo.
//!
//! The latent log-volatility path is updated by HMC with a leapfrog
//! integrator built from three data-parallel kernels; the static parameters
//! are updated by Metropolis-within-Gibbs. The [`bench`] module times the
//! elementary leapfrog step as a function of series length and fits the
//! linear cost model used to compare execution backends.

pub mod bench;
pub mod data;
pub mod diagnostics;
pub mod exec;
pub mod float;
pub mod integrator;
pub mod io;
pub mod model;
pub mod rng;
pub mod sampler;

pub use exec::{Backend, Executor};
pub use float::{Precision, Real};
pub use integrator::{Leapfrog, MdConfig, Trajectory};
pub use model::{Dataset, Params, PhaseState, Posterior};
pub use sampler::{ChainOutput, ChainSample, PriorSpec, SamplerConfig};
