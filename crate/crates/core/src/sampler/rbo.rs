//! Randomized Bayesian-optimization baseline.
//!
//! Each iteration evaluates the continuous maximizer of the GP upper Jensen
//! bound plus the next stream point. Nothing stops the optimizer from
//! returning to a point it already chose, so late picks pile up at the mode.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bis::Surrogate;
use super::{evaluate, BisConfig, Evaluations, IterationRecord, SelectionKind, WeightedSampleSet};
use crate::acquisition::{ujb_score, ujb_score_partials, PhiSpec};
use crate::error::Result;
use crate::gp::GpPosterior;
use crate::lowdisc::{Domain, HaltonStream, ScaledStream};
use crate::targets::TargetDensity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RboConfig {
    pub bis: BisConfig,
    /// Local ascents per iteration, started from the best candidates.
    pub starts: usize,
    pub steps: usize,
    /// Optimizer picks closer than this to a training input are not added to
    /// the GP again (they are still evaluated and weighted).
    pub merge_radius: f64,
}

impl Default for RboConfig {
    fn default() -> Self {
        Self {
            bis: BisConfig::default(),
            starts: 16,
            steps: 100,
            merge_radius: 1e-8,
        }
    }
}

fn score_at(post: &GpPosterior, theta: &[f64], phi: PhiSpec) -> f64 {
    let (m, s2) = post.predict(theta);
    ujb_score(m, s2, phi)
}

/// Projected normalized-gradient ascent in unit-cube coordinates with an
/// adaptive step.
fn ascend(
    post: &GpPosterior,
    domain: &Domain,
    phi: PhiSpec,
    start: &[f64],
    steps: usize,
) -> (Vec<f64>, f64) {
    let widths = domain.widths();
    let mut x = start.to_vec();
    let mut fx = score_at(post, &x, phi);
    let mut eta = 0.05;
    for _ in 0..steps {
        let ((m, gm), (s2, gs)) = post.predict_gradient(&x);
        let (dm, ds) = ujb_score_partials(m, s2, phi);
        let g: Vec<f64> = (0..x.len())
            .map(|i| (dm * gm[i] + ds * gs[i]) * widths[i])
            .collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        let mut cand: Vec<f64> = (0..x.len())
            .map(|i| x[i] + eta * g[i] / norm * widths[i])
            .collect();
        domain.clamp(&mut cand);
        let fc = score_at(post, &cand, phi);
        if fc > fx {
            x = cand;
            fx = fc;
            eta = (eta * 1.5).min(0.25);
        } else {
            eta *= 0.5;
            if eta < 1e-9 {
                break;
            }
        }
    }
    (x, fx)
}

/// Runs the randomized-BO sampler for `config.bis.budget` evaluations.
pub fn randomized_bo_is(
    target: &dyn TargetDensity,
    config: &RboConfig,
) -> Result<WeightedSampleSet> {
    let bis = &config.bis;
    bis.validate()?;
    let domain = target.domain().clone();
    let log_u = -domain.log_volume();
    let n0 = bis.n_initial();
    let start = Instant::now();
    let mut stream = bis.proposal.stream(&domain, bis.seed);
    // Fixed candidates used only to seed the local ascents.
    let candidates: Vec<Vec<f64>> = {
        let mut s = ScaledStream::new(Box::new(HaltonStream::new(domain.dim())), domain.clone())?;
        (0..bis.pool_size.max(config.starts))
            .map(|_| s.next_point().1)
            .collect()
    };

    let mut evals = Evaluations::default();
    let mut points = Vec::with_capacity(bis.budget);
    let mut ratios = Vec::with_capacity(bis.budget);
    let mut trace: Vec<IterationRecord> = Vec::with_capacity(bis.budget);
    let mut record = |kind,
                      index,
                      theta: Vec<f64>,
                      lq: f64,
                      acq,
                      hyper,
                      points: &mut Vec<Vec<f64>>,
                      ratios: &mut Vec<f64>| {
        trace.push(IterationRecord {
            n: points.len() + 1,
            kind,
            stream_index: index,
            point: theta.clone(),
            log_q: lq,
            acquisition: acq,
            hyperparameters: hyper,
            wall_time: start.elapsed().as_secs_f64(),
        });
        points.push(theta);
        ratios.push(lq - log_u);
    };

    for _ in 0..n0 {
        let (index, theta) = stream.next_point();
        let lq = evaluate(target, &theta);
        evals.push(theta.clone(), lq);
        record(
            SelectionKind::Initial,
            Some(index),
            theta,
            lq,
            None,
            None,
            &mut points,
            &mut ratios,
        );
    }

    let mut surrogate = Surrogate::new(bis, &domain);
    let mut step = 0;
    while points.len() < bis.budget {
        surrogate.update(&evals, step);
        step += 1;
        let (theta, acq) = match surrogate.posterior() {
            Some(post) => {
                let mut scored: Vec<(f64, usize)> = candidates
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (score_at(post, c, bis.phi), i))
                    .collect();
                scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                let mut best: Option<(Vec<f64>, f64)> = None;
                for &(_, i) in scored.iter().take(config.starts) {
                    let (x, fx) = ascend(post, &domain, bis.phi, &candidates[i], config.steps);
                    if best.as_ref().is_none_or(|(_, fb)| fx > *fb) {
                        best = Some((x, fx));
                    }
                }
                let (x, fx) = best.expect("at least one start");
                (x, Some(fx))
            }
            None => (stream.next_point().1, None),
        };
        let lq = evaluate(target, &theta);
        let merged = evals
            .inputs
            .iter()
            .any(|x| crate::gp::sq_dist(x, &theta).sqrt() <= config.merge_radius);
        if !merged {
            evals.push(theta.clone(), lq);
        }
        let hyper = Some(surrogate.hyperparameters().clone());
        record(
            SelectionKind::Optimized,
            None,
            theta,
            lq,
            acq,
            hyper.clone(),
            &mut points,
            &mut ratios,
        );

        if points.len() < bis.budget {
            let (index, theta) = stream.next_point();
            let lq = evaluate(target, &theta);
            evals.push(theta.clone(), lq);
            record(
                SelectionKind::Random,
                Some(index),
                theta,
                lq,
                None,
                hyper,
                &mut points,
                &mut ratios,
            );
        }
    }

    let mut set = WeightedSampleSet::from_log_ratios(points, ratios)?;
    set.trace = trace;
    Ok(set)
}
