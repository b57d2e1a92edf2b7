//! Bandit importance sampling.
//!
//! Weighted samples for an expensive, unnormalized target density are built by
//! sequentially picking points from a pool of low-discrepancy candidates. A
//! Gaussian-process surrogate of the (transformed) log-density scores every
//! candidate through the GP upper Jensen bound `E[phi(f(theta))]`; the winner is
//! evaluated once and replaced by the next point of the proposal sequence, so no
//! point is ever revisited. After the last pick the density ratios are
//! self-normalized into importance weights.
//!
//! Modules:
//!
//! - [`lowdisc`]: domains, Halton streams and star discrepancy.
//! - [`gp`]: exact GP regression, evidence and maximum-likelihood fitting.
//! - [`acquisition`]: the GP-UJB criterion for the exp, relu and square maps.
//! - [`targets`]: benchmark densities, the g-and-k posterior and the stochastic
//!   Lorenz-96 synthetic-likelihood posterior.
//! - [`sampler`]: the bandit sampler and its two baselines.
//! - [`metrics`]: MMD, numerical TVD, weighted KDE, and the UJB L2 gap check.

pub mod acquisition;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod lowdisc;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod targets;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
