//! The bandit sampler: pick the pool point with the largest GP upper Jensen
//! bound, evaluate it once, replace it with the next stream point.

use std::time::Instant;

use rayon::prelude::*;

use super::{
    default_hyperparameters, evaluate, fixed_kernel, noise_variance, BisConfig, Evaluations,
    HyperMode, IterationRecord, SelectionKind, WeightedSampleSet,
};
use crate::acquisition::{ujb_score, PhiSpec};
use crate::error::Result;
use crate::gp::{
    mle_fit, GpPosterior, Hyperparameters, KernelFactor, KernelSpec, MeanForm, MleConfig,
    NoiseMode, TrainingSet,
};
use crate::lowdisc::{Domain, ScaledStream};
use crate::targets::TargetDensity;

/// Pool sizes above which scans are split across threads.
const PARALLEL_POOL: usize = 4096;

/// GP surrogate over the evaluations of a run, updated once per iteration.
pub(crate) struct Surrogate {
    phi: PhiSpec,
    output_floor: Option<f64>,
    mean_form: MeanForm,
    noise: NoiseMode,
    fixed: Option<KernelSpec>,
    mle: MleConfig,
    refit_stride: usize,
    seed: u64,
    hyper: Hyperparameters,
    fitted: bool,
    posterior: Option<GpPosterior>,
    /// Bumped whenever the factor is rebuilt rather than extended.
    generation: u64,
}

impl Surrogate {
    pub fn new(config: &BisConfig, domain: &Domain) -> Self {
        let fixed = fixed_kernel(&config.hyper);
        let mut hyper = default_hyperparameters(domain);
        if let Some(k) = fixed {
            hyper = Hyperparameters::new(k.lengthscale, k.variance);
        }
        let refit_stride = match config.hyper {
            HyperMode::Mle { refit_stride, .. } => refit_stride.max(1),
            HyperMode::Fixed { .. } => usize::MAX,
        };
        Self {
            phi: config.phi,
            output_floor: config.output_floor,
            mean_form: config.mean_form,
            noise: config.noise,
            fixed,
            mle: config.mle_config(domain),
            refit_stride,
            seed: config.seed,
            hyper,
            fitted: false,
            posterior: None,
            generation: 0,
        }
    }

    pub fn posterior(&self) -> Option<&GpPosterior> {
        self.posterior.as_ref()
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Brings the posterior up to date with `evals`. `step` counts bandit
    /// iterations and drives the refit schedule.
    pub fn update(&mut self, evals: &Evaluations, step: usize) {
        if evals.len() == 0 {
            return;
        }
        let noise = noise_variance(self.noise, Some(&self.hyper));
        let outputs = evals.outputs(self.phi, self.output_floor);
        let refit = self.fixed.is_none()
            && evals.len() >= 2
            && (!self.fitted || step % self.refit_stride == 0);
        if refit {
            match TrainingSet::new(evals.inputs.clone(), outputs.clone(), noise)
                .and_then(|t| mle_fit(&t, self.mean_form, &self.mle, self.seed, Some(&self.hyper)))
            {
                Ok((hyper, posterior)) => {
                    self.hyper = hyper;
                    self.posterior = Some(posterior);
                    self.fitted = true;
                    self.generation += 1;
                    return;
                }
                Err(e) => log::warn!("hyperparameter refit failed ({e}); keeping previous values"),
            }
        }

        let noise = noise_variance(self.noise, Some(&self.hyper));
        let kernel = self.hyper.kernel();
        let mut factor = match self.posterior.take() {
            Some(p) if p.kernel() == &kernel && p.factor().noise_variance() == noise => {
                Some(p.into_factor())
            }
            _ => None,
        };
        if let Some(f) = factor.as_mut() {
            for x in &evals.inputs[f.len()..] {
                if f.append(x.clone()).is_err() {
                    factor = None;
                    break;
                }
            }
        }
        let factor = match factor {
            Some(f) => f,
            None => {
                self.generation += 1;
                match KernelFactor::build(kernel, noise, evals.inputs.clone()) {
                    Ok(f) => f,
                    Err(e) => {
                        log::warn!(
                            "GP factorization failed ({e}); surrogate unavailable this iteration"
                        );
                        return;
                    }
                }
            }
        };
        match GpPosterior::from_factor_profiled(factor, self.mean_form, outputs) {
            Ok(p) => {
                self.hyper.mean_coefficients = p.mean_spec().coefficients().to_vec();
                self.posterior = Some(p);
            }
            Err(e) => log::warn!("GP conditioning failed ({e})"),
        }
    }
}

struct PoolEntry {
    index: u64,
    point: Vec<f64>,
    /// `L^{-1} k_n(point)` for the surrogate generation in `CandidatePool`.
    whitened: Vec<f64>,
}

/// The `M` candidates currently eligible for selection, refilled from the
/// proposal stream.
pub struct CandidatePool {
    entries: Vec<PoolEntry>,
    stream: ScaledStream,
    generation: Option<u64>,
}

impl CandidatePool {
    /// Fills the pool with the next `size` stream points.
    pub fn new(mut stream: ScaledStream, size: usize) -> Self {
        let entries = (0..size)
            .map(|_| {
                let (index, point) = stream.next_point();
                PoolEntry {
                    index,
                    point,
                    whitened: Vec::new(),
                }
            })
            .collect();
        Self {
            entries,
            stream,
            generation: None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.iter().map(|e| e.point.as_slice())
    }

    pub fn stream_indices(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.index)
    }

    /// Index of the next point the stream will emit.
    pub fn stream_position(&self) -> u64 {
        self.stream.position()
    }

    /// Updates the cached whitened vectors for the surrogate's current factor.
    fn refresh(&mut self, surrogate: &Surrogate) {
        let Some(post) = surrogate.posterior() else {
            return;
        };
        let factor = post.factor();
        let rebuild = self.generation != Some(surrogate.generation());
        let work = |e: &mut PoolEntry| {
            if rebuild {
                e.whitened = factor.whiten(&e.point);
            } else {
                factor.extend_whitened(&e.point, &mut e.whitened);
            }
        };
        if self.entries.len() >= PARALLEL_POOL {
            self.entries.par_iter_mut().for_each(work);
        } else {
            self.entries.iter_mut().for_each(work);
        }
        self.generation = Some(surrogate.generation());
    }

    fn scores(&self, surrogate: &Surrogate, phi: PhiSpec) -> Vec<f64> {
        let Some(post) = surrogate.posterior() else {
            return vec![0.0; self.entries.len()];
        };
        let score = |e: &PoolEntry| {
            let (m, s2) = post.predict_whitened(&e.point, &e.whitened);
            ujb_score(m, s2, phi)
        };
        if self.entries.len() >= PARALLEL_POOL {
            self.entries.par_iter().map(score).collect()
        } else {
            self.entries.iter().map(score).collect()
        }
    }

    /// Slot with the best score; ties go to the lowest stream index.
    fn best_slot(&self, scores: &[f64]) -> usize {
        let mut best = 0;
        for i in 1..scores.len() {
            let (s, b) = (scores[i], scores[best]);
            if s > b || (s == b && self.entries[i].index < self.entries[best].index) || b.is_nan() {
                best = i;
            }
        }
        best
    }

    /// Removes the point in `slot`, refilling it from the stream.
    fn take(&mut self, slot: usize, surrogate: &Surrogate) -> (u64, Vec<f64>) {
        let (index, point) = self.stream.next_point();
        let whitened = match surrogate.posterior() {
            Some(p) if self.generation == Some(surrogate.generation()) => p.factor().whiten(&point),
            _ => Vec::new(),
        };
        let old = std::mem::replace(
            &mut self.entries[slot],
            PoolEntry {
                index,
                point,
                whitened,
            },
        );
        (old.index, old.point)
    }
}

/// Runs the bandit sampler for `config.budget` evaluations.
pub fn bis_run(target: &dyn TargetDensity, config: &BisConfig) -> Result<WeightedSampleSet> {
    let (set, _pool) = bis_run_with_pool(target, config)?;
    Ok(set)
}

/// [`bis_run`] that also returns the final candidate pool.
pub fn bis_run_with_pool(
    target: &dyn TargetDensity,
    config: &BisConfig,
) -> Result<(WeightedSampleSet, CandidatePool)> {
    config.validate()?;
    let domain = target.domain().clone();
    let log_u = -domain.log_volume();
    let n0 = config.n_initial();
    let start = Instant::now();
    let mut stream = config.proposal.stream(&domain, config.seed);

    let mut evals = Evaluations::default();
    let mut points = Vec::with_capacity(config.budget);
    let mut ratios = Vec::with_capacity(config.budget);
    let mut trace = Vec::with_capacity(config.budget);

    for i in 0..n0 {
        let (index, theta) = stream.next_point();
        let lq = evaluate(target, &theta);
        evals.push(theta.clone(), lq);
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
        ratios.push(lq - log_u);
    }

    let mut pool = CandidatePool::new(stream, config.pool_size);
    let mut surrogate = Surrogate::new(config, &domain);
    for step in 0..config.budget - n0 {
        surrogate.update(&evals, step);
        pool.refresh(&surrogate);
        let scores = pool.scores(&surrogate, config.phi);
        let slot = pool.best_slot(&scores);
        let score = scores[slot];
        let (index, theta) = pool.take(slot, &surrogate);
        let lq = evaluate(target, &theta);
        evals.push(theta.clone(), lq);
        trace.push(IterationRecord {
            n: n0 + step + 1,
            kind: SelectionKind::Bandit,
            stream_index: Some(index),
            point: theta.clone(),
            log_q: lq,
            acquisition: surrogate.posterior().map(|_| score),
            hyperparameters: Some(surrogate.hyperparameters().clone()),
            wall_time: start.elapsed().as_secs_f64(),
        });
        points.push(theta);
        ratios.push(lq - log_u);
    }

    let mut set = WeightedSampleSet::from_log_ratios(points, ratios)?;
    set.trace = trace;
    Ok((set, pool))
}
