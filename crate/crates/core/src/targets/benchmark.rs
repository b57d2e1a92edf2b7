//! Two-dimensional quadratic-form benchmarks and a 1-D normal.

use serde::{Deserialize, Serialize};

use super::{check_domain, EvalCounter, TargetDensity};
use crate::error::Result;
use crate::lowdisc::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Gaussian,
    Bimodal,
    Banana,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [
        BenchmarkKind::Gaussian,
        BenchmarkKind::Bimodal,
        BenchmarkKind::Banana,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Gaussian => "gaussian",
            BenchmarkKind::Bimodal => "bimodal",
            BenchmarkKind::Banana => "banana",
        }
    }

    pub fn rho(self) -> f64 {
        match self {
            BenchmarkKind::Gaussian => 0.25,
            BenchmarkKind::Bimodal => 0.5,
            BenchmarkKind::Banana => 0.9,
        }
    }

    pub fn domain(self) -> Domain {
        match self {
            BenchmarkKind::Gaussian => Domain::cube(2, -16.0, 16.0),
            BenchmarkKind::Bimodal => Domain::cube(2, -6.0, 6.0),
            BenchmarkKind::Banana => Domain::new(vec![-6.0, -20.0], vec![6.0, 2.0]),
        }
        .expect("static domain")
    }

    /// `(T1, T2)` at `theta`.
    pub fn transforms(self, theta: &[f64]) -> (f64, f64) {
        let (a, b) = (theta[0], theta[1]);
        match self {
            BenchmarkKind::Gaussian => (a, b),
            BenchmarkKind::Bimodal => (a, b * b - 2.0),
            BenchmarkKind::Banana => (a, b + a * a + 1.0),
        }
    }

    /// `-0.5 [T1 T2] [[1, rho], [rho, 1]] [T1 T2]^T`.
    pub fn log_q(self, theta: &[f64]) -> f64 {
        let (t1, t2) = self.transforms(theta);
        -0.5 * (t1 * t1 + 2.0 * self.rho() * t1 * t2 + t2 * t2)
    }
}

impl std::str::FromStr for BenchmarkKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BenchmarkKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown benchmark '{s}'"))
    }
}

#[derive(Debug)]
pub struct Benchmark {
    kind: BenchmarkKind,
    domain: Domain,
    counter: EvalCounter,
}

impl Benchmark {
    pub fn new(kind: BenchmarkKind) -> Self {
        Self {
            kind,
            domain: kind.domain(),
            counter: EvalCounter::default(),
        }
    }

    pub fn kind(&self) -> BenchmarkKind {
        self.kind
    }
}

impl TargetDensity for Benchmark {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn log_q_uncounted(&self, theta: &[f64], _key: u64) -> Result<f64> {
        check_domain(&self.domain, theta)?;
        Ok(self.kind.log_q(theta))
    }
}

/// Unnormalized 1-D normal `exp(-(x - mean)^2 / (2 sd^2))` on an interval.
#[derive(Debug)]
pub struct NormalTarget {
    mean: f64,
    sd: f64,
    domain: Domain,
    counter: EvalCounter,
}

impl NormalTarget {
    pub fn new(mean: f64, sd: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(sd > 0.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "sd must be positive, got {sd}"
            )));
        }
        Ok(Self {
            mean,
            sd,
            domain: Domain::new(vec![lower], vec![upper])?,
            counter: EvalCounter::default(),
        })
    }
}

impl TargetDensity for NormalTarget {
    fn name(&self) -> &str {
        "normal"
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn log_q_uncounted(&self, theta: &[f64], _key: u64) -> Result<f64> {
        check_domain(&self.domain, theta)?;
        let z = (theta[0] - self.mean) / self.sd;
        Ok(-0.5 * z * z)
    }
}
