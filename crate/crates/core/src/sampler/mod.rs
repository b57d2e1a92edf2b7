//! Bandit importance sampling and the two baselines it is compared with.

mod bis;
mod rbo;

pub use bis::{bis_run, bis_run_with_pool, CandidatePool};
pub use rbo::{randomized_bo_is, RboConfig};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{transform_output, PhiSpec};
use crate::error::{Error, Result};
use crate::gp::{Hyperparameters, KernelSpec, MeanForm, MleConfig, NoiseMode};
use crate::lowdisc::{Domain, HaltonStream, ProposalStream, ScaledStream, UniformStream};
use crate::rng::{derive_seed, purpose};
use crate::targets::{is_sentinel, TargetDensity, FAILED_LOG_Q};

/// Proposal sequence feeding the candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Proposal {
    /// Scaled Halton sequence. With `random_start = Some(w)` the stream begins
    /// at a seeded index in `1..=w` instead of 1.
    Halton { random_start: Option<u64> },
    /// I.i.d. uniform points from the run seed.
    Uniform,
}

impl Default for Proposal {
    fn default() -> Self {
        Proposal::Halton {
            random_start: Some(10_000),
        }
    }
}

impl Proposal {
    /// The stream for one run.
    pub fn stream(&self, domain: &Domain, seed: u64) -> ScaledStream {
        let unit: Box<dyn ProposalStream> = match *self {
            Proposal::Halton { random_start } => {
                let start = match random_start {
                    Some(w) if w > 0 => 1 + derive_seed(seed, purpose::STREAM_OFFSET, 0) % w,
                    _ => 1,
                };
                Box::new(HaltonStream::new(domain.dim()).starting_at(start))
            }
            Proposal::Uniform => Box::new(UniformStream::new(domain.dim(), seed)),
        };
        ScaledStream::new(unit, domain.clone()).expect("stream built for the domain's dimension")
    }
}

/// How GP hyperparameters are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum HyperMode {
    /// Evidence maximization every `refit_stride` iterations, warm-started.
    Mle {
        refit_stride: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        search: Option<MleConfig>,
    },
    /// A fixed kernel; a quadratic mean is still re-profiled every iteration.
    Fixed { lengthscale: f64, variance: f64 },
}

impl Default for HyperMode {
    fn default() -> Self {
        HyperMode::Mle {
            refit_stride: 1,
            search: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BisConfig {
    /// Total number of density evaluations `N`, initial points included.
    pub budget: usize,
    /// Initial points taken straight from the stream; `ceil(N / 10)` if unset.
    pub initial_points: Option<usize>,
    pub pool_size: usize,
    pub phi: PhiSpec,
    pub mean_form: MeanForm,
    pub hyper: HyperMode,
    /// Observation-noise handling; overrides the search config's own setting.
    pub noise: NoiseMode,
    pub proposal: Proposal,
    pub seed: u64,
    /// Clamp for centered log-q outputs in GP training. Weights always use
    /// the exact values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_floor: Option<f64>,
}

impl Default for BisConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            initial_points: None,
            pool_size: 2048,
            phi: PhiSpec::Exp,
            mean_form: MeanForm::Zero,
            hyper: HyperMode::default(),
            noise: NoiseMode::Fixed { variance: 1e-6 },
            proposal: Proposal::default(),
            seed: 0,
            output_floor: None,
        }
    }
}

impl BisConfig {
    pub fn n_initial(&self) -> usize {
        self.initial_points.unwrap_or(self.budget.div_ceil(10))
    }

    pub fn validate(&self) -> Result<()> {
        let n0 = self.n_initial();
        if n0 < 1 || n0 >= self.budget {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= N0 < N, got N0 = {n0}, N = {}",
                self.budget
            )));
        }
        if self.pool_size < 1 {
            return Err(Error::InvalidConfig("pool size must be at least 1".into()));
        }
        if self.output_floor.is_some_and(|f| !(f > 0.0)) {
            return Err(Error::InvalidConfig("output floor must be positive".into()));
        }
        match &self.hyper {
            HyperMode::Mle { refit_stride, .. } if *refit_stride == 0 => Err(Error::InvalidConfig(
                "refit stride must be at least 1".into(),
            )),
            HyperMode::Fixed {
                lengthscale,
                variance,
            } if !(*lengthscale > 0.0 && *variance > 0.0) => Err(Error::InvalidConfig(
                "fixed kernel parameters must be positive".into(),
            )),
            _ => Ok(()),
        }
    }

    pub(crate) fn mle_config(&self, domain: &Domain) -> MleConfig {
        let mut cfg = match &self.hyper {
            HyperMode::Mle {
                search: Some(s), ..
            } => s.clone(),
            _ => MleConfig::for_domain(domain),
        };
        cfg.noise = self.noise;
        cfg
    }
}

/// How an evaluated point was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    Initial,
    Bandit,
    Optimized,
    Random,
}

/// One density evaluation of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based evaluation number.
    pub n: usize,
    pub kind: SelectionKind,
    /// Index in the proposal stream; `None` for off-stream points.
    pub stream_index: Option<u64>,
    pub point: Vec<f64>,
    pub log_q: f64,
    /// Acquisition score of the chosen point (log scale for the exp map).
    pub acquisition: Option<f64>,
    pub hyperparameters: Option<Hyperparameters>,
    /// Seconds since the run started.
    pub wall_time: f64,
}

/// Evaluated points with self-normalized importance weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSampleSet {
    pub points: Vec<Vec<f64>>,
    /// `log q - log u` per point.
    pub log_ratios: Vec<f64>,
    pub weights: Vec<f64>,
    pub trace: Vec<IterationRecord>,
}

impl WeightedSampleSet {
    pub fn from_log_ratios(points: Vec<Vec<f64>>, log_ratios: Vec<f64>) -> Result<Self> {
        if points.len() != log_ratios.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: log_ratios.len(),
            });
        }
        let weights = self_normalize(&log_ratios)?;
        Ok(Self {
            points,
            log_ratios,
            weights,
            trace: Vec::new(),
        })
    }

    /// Equally weighted atoms.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::from_log_ratios(points, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// The first `n` points, reweighted among themselves.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        let mut s =
            Self::from_log_ratios(self.points[..n].to_vec(), self.log_ratios[..n].to_vec())?;
        s.trace = self.trace.iter().take(n).cloned().collect();
        Ok(s)
    }

    /// `1 / sum w^2`.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// `w_i = exp(l_i - logsumexp(l))`; sentinel entries get weight 0.
pub fn self_normalize(log_ratios: &[f64]) -> Result<Vec<f64>> {
    let max = log_ratios
        .iter()
        .copied()
        .filter(|l| !is_sentinel(*l) && l.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let shifted: Vec<f64> = log_ratios
        .iter()
        .map(|&l| {
            if is_sentinel(l) || !l.is_finite() {
                0.0
            } else {
                (l - max).exp()
            }
        })
        .collect();
    let total: f64 = shifted.iter().sum();
    Ok(shifted.into_iter().map(|x| x / total).collect())
}

/// Importance sampling on the first `n` points of `stream`.
pub fn standard_is(
    target: &dyn TargetDensity,
    n: usize,
    stream: &mut ScaledStream,
) -> Result<WeightedSampleSet> {
    if n == 0 {
        return Err(Error::EmptyInput("standard IS budget"));
    }
    let log_u = -target.domain().log_volume();
    let start = Instant::now();
    let mut points = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    for i in 0..n {
        let (index, theta) = stream.next_point();
        let lq = evaluate(target, &theta);
        ratios.push(lq - log_u);
        trace.push(IterationRecord {
            n: i + 1,
            kind: SelectionKind::Initial,
            stream_index: Some(index),
            point: theta.clone(),
            log_q: lq,
            acquisition: None,
            hyperparameters: None,
            wall_time: start.elapsed().as_secs_f64(),
        });
        points.push(theta);
    }
    let mut set = WeightedSampleSet::from_log_ratios(points, ratios)?;
    set.trace = trace;
    Ok(set)
}

/// One counted evaluation; errors become the sentinel.
pub(crate) fn evaluate(target: &dyn TargetDensity, theta: &[f64]) -> f64 {
    match target.log_q(theta) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => {
            log::warn!("non-finite log q {v} at {theta:?}; using sentinel");
            FAILED_LOG_Q
        }
        Err(e) => {
            log::warn!("density evaluation failed at {theta:?}: {e}; using sentinel");
            FAILED_LOG_Q
        }
    }
}

/// Evaluated points kept for GP training, with output centering.
#[derive(Debug, Clone, Default)]
pub(crate) struct Evaluations {
    pub inputs: Vec<Vec<f64>>,
    pub log_q: Vec<f64>,
}

impl Evaluations {
    /// Adds a point unless it failed. Returns whether it was kept.
    pub fn push(&mut self, theta: Vec<f64>, log_q: f64) -> bool {
        if is_sentinel(log_q) {
            return false;
        }
        self.inputs.push(theta);
        self.log_q.push(log_q);
        true
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    /// `phi^{-1}(q / max q)` for every kept point.
    pub fn outputs(&self, phi: PhiSpec, floor: Option<f64>) -> Vec<f64> {
        surrogate_outputs(&self.log_q, phi, floor)
    }
}

/// GP training outputs for log-q values: centered on their maximum, clamped
/// below at `-floor` when a floor is set, then mapped through `phi^{-1}`.
pub fn surrogate_outputs(log_q: &[f64], phi: PhiSpec, floor: Option<f64>) -> Vec<f64> {
    let (_, centered) = crate::gp::center_outputs(log_q);
    let lo = floor.map_or(f64::NEG_INFINITY, |f| -f);
    centered
        .into_iter()
        .map(|l| transform_output(phi, l.max(lo)).value)
        .collect()
}

/// Initial hyperparameters when no fit has succeeded yet.
pub(crate) fn default_hyperparameters(domain: &Domain) -> Hyperparameters {
    Hyperparameters::new(0.1 * domain.diameter(), 1.0)
}

pub(crate) fn fixed_kernel(hyper: &HyperMode) -> Option<KernelSpec> {
    match *hyper {
        HyperMode::Fixed {
            lengthscale,
            variance,
        } => Some(KernelSpec {
            lengthscale,
            variance,
        }),
        HyperMode::Mle { .. } => None,
    }
}

pub(crate) fn noise_variance(noise: NoiseMode, hyper: Option<&Hyperparameters>) -> f64 {
    match noise {
        NoiseMode::Fixed { variance } => variance,
        NoiseMode::Estimate {
            log_lower,
            log_upper,
        } => hyper
            .and_then(|h| h.log_noise)
            .unwrap_or(0.5 * (log_lower + log_upper))
            .exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_clamps_centered_outputs_only() {
        let lq = [-10.0, -5000.0, -3.0];
        assert_eq!(
            surrogate_outputs(&lq, PhiSpec::Exp, None),
            vec![-7.0, -4997.0, 0.0]
        );
        assert_eq!(
            surrogate_outputs(&lq, PhiSpec::Exp, Some(100.0)),
            vec![-7.0, -100.0, 0.0]
        );
    }

    #[test]
    fn normalization_examples() {
        let w = self_normalize(&[0.0, 0.0, 0.0]).unwrap();
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(
            self_normalize(&[0.0, f64::NEG_INFINITY]).unwrap(),
            vec![1.0, 0.0]
        );
        let w = self_normalize(&[710.0, 0.0]).unwrap();
        assert_eq!(w[0], 1.0);
        assert!(w[1] > 0.0 && w[1] < 1e-300);
        assert!(self_normalize(&[FAILED_LOG_Q, FAILED_LOG_Q]).is_err());
        assert_eq!(
            self_normalize(&[FAILED_LOG_Q, 3.0]).unwrap(),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn default_initial_points() {
        let c = BisConfig {
            budget: 95,
            ..BisConfig::default()
        };
        assert_eq!(c.n_initial(), 10);
        assert!(BisConfig {
            budget: 1,
            ..BisConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn halton_offset_depends_on_seed() {
        let d = Domain::cube(2, 0.0, 1.0).unwrap();
        let p = Proposal::default();
        let a = p.stream(&d, 1).position();
        let b = p.stream(&d, 2).position();
        assert_ne!(a, b);
        assert!((1..=10_000).contains(&a));
        let fixed = Proposal::Halton { random_start: None };
        assert_eq!(fixed.stream(&d, 9).position(), 1);
    }
}
