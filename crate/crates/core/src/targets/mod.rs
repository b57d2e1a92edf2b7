//! Target densities known up to a constant, each with a domain and an
//! evaluation counter.

mod benchmark;
pub mod gandk;
pub mod lorenz;

use std::sync::atomic::{AtomicU64, Ordering};

pub use benchmark::{Benchmark, BenchmarkKind, NormalTarget};
pub use gandk::{GandK, GandKParams, GandKPosterior};
pub use lorenz::{LorenzConfig, LorenzPosterior};

use crate::error::Result;
use crate::lowdisc::Domain;

/// Log-density returned when an evaluation fails.
pub const FAILED_LOG_Q: f64 = -1e30;

/// True for the failure sentinel (and anything at least as small).
#[inline]
pub fn is_sentinel(log_q: f64) -> bool {
    !(log_q > FAILED_LOG_Q * 0.5)
}

/// Unnormalized target density `q` on a hyperrectangle.
pub trait TargetDensity: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> &Domain;

    /// `log q(theta)`. Each call counts as one evaluation.
    fn log_q(&self, theta: &[f64]) -> Result<f64> {
        let key = self.counter().bump();
        self.log_q_uncounted(theta, key)
    }

    /// `log q(theta)` with an explicit key for any internal randomness,
    /// e.g. when evaluating in parallel. Counts as one evaluation.
    fn log_q_keyed(&self, theta: &[f64], key: u64) -> Result<f64> {
        self.counter().bump();
        self.log_q_uncounted(theta, key)
    }

    fn eval_count(&self) -> u64 {
        self.counter().get()
    }

    fn reset_count(&self) {
        self.counter().reset();
    }

    #[doc(hidden)]
    fn counter(&self) -> &EvalCounter;

    /// Evaluation without bookkeeping. Deterministic given `(theta, key)`.
    #[doc(hidden)]
    fn log_q_uncounted(&self, theta: &[f64], key: u64) -> Result<f64>;
}

/// Monotone count of density evaluations.
#[derive(Debug, Default)]
pub struct EvalCounter(AtomicU64);

impl EvalCounter {
    /// Increments and returns the previous value.
    pub fn bump(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed)
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Rejects points of the wrong dimension or outside the domain.
pub(crate) fn check_domain(domain: &Domain, theta: &[f64]) -> Result<()> {
    if theta.len() != domain.dim() {
        return Err(crate::Error::DimensionMismatch {
            expected: domain.dim(),
            got: theta.len(),
        });
    }
    if !domain.contains(theta) {
        return Err(crate::Error::OutOfDomain {
            point: theta.to_vec(),
        });
    }
    Ok(())
}
