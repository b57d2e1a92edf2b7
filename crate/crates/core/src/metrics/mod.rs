//! Approximation-error metrics.

mod mmd;

pub use mmd::{mmd, mmd_squared, MmdKernel, MmdReference, PrefixMmd};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpPosterior;
use crate::lowdisc::{Domain, ScaledStream};
use crate::sampler::WeightedSampleSet;
use crate::special::LN_SQRT_2PI;

/// Scaled Halton nodes used for numerical integration over a domain.
pub fn halton_nodes(domain: &Domain, n: usize) -> Vec<Vec<f64>> {
    let mut s = ScaledStream::halton(domain);
    (0..n).map(|_| s.next_point().1).collect()
}

fn normalized(log_values: &[f64]) -> Result<Vec<f64>> {
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let e: Vec<f64> = log_values.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / z).collect())
}

/// Total variation between two densities given by their log-proportionals
/// at a common node set. Each density is normalized by its node average, so
/// `V/(2n) sum |p_i - r_i|` reduces to half the L1 distance between the
/// normalized node masses.
pub fn tvd_from_log_values(log_p: &[f64], log_r: &[f64]) -> Result<f64> {
    if log_p.len() != log_r.len() {
        return Err(Error::DimensionMismatch {
            expected: log_p.len(),
            got: log_r.len(),
        });
    }
    let p = normalized(log_p)?;
    let r = normalized(log_r)?;
    Ok((0.5 * p.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum::<f64>()).clamp(0.0, 1.0))
}

/// TVD over `n_nodes` scaled Halton nodes.
pub fn tvd_numeric<P, R>(log_p: P, log_r: R, domain: &Domain, n_nodes: usize) -> Result<f64>
where
    P: Fn(&[f64]) -> f64,
    R: Fn(&[f64]) -> f64,
{
    if n_nodes == 0 {
        return Err(Error::EmptyInput("TVD nodes"));
    }
    let nodes = halton_nodes(domain, n_nodes);
    let lp: Vec<f64> = nodes.iter().map(|x| log_p(x)).collect();
    let lr: Vec<f64> = nodes.iter().map(|x| log_r(x)).collect();
    tvd_from_log_values(&lp, &lr)
}

/// Product Gaussian kernel density estimate from weighted samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Per-coordinate standard deviations of the kernel.
    pub bandwidth: Vec<f64>,
}

impl Kde {
    pub fn new(samples: &WeightedSampleSet, bandwidth: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("KDE samples"));
        }
        if bandwidth.len() != samples.dim() {
            return Err(Error::DimensionMismatch {
                expected: samples.dim(),
                got: bandwidth.len(),
            });
        }
        if bandwidth.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidParameter(
                "KDE bandwidths must be positive".into(),
            ));
        }
        Ok(Self {
            points: samples.points.clone(),
            weights: samples.weights.clone(),
            bandwidth,
        })
    }

    /// Silverman's rule per coordinate with the effective sample size
    /// `1 / sum w^2` in place of `n`.
    pub fn silverman(samples: &WeightedSampleSet) -> Result<Self> {
        let d = samples.dim();
        let n_eff = samples.effective_sample_size();
        let factor = (4.0 / ((d as f64 + 2.0) * n_eff)).powf(1.0 / (d as f64 + 4.0));
        let mut bw = Vec::with_capacity(d);
        for j in 0..d {
            let mean: f64 = samples
                .points
                .iter()
                .zip(&samples.weights)
                .map(|(x, w)| w * x[j])
                .sum();
            let var: f64 = samples
                .points
                .iter()
                .zip(&samples.weights)
                .map(|(x, w)| w * (x[j] - mean).powi(2))
                .sum();
            let sd = var.sqrt();
            bw.push(if sd > 0.0 { sd * factor } else { 1e-3 });
        }
        Self::new(samples, bw)
    }

    pub fn evaluate(&self, theta: &[f64]) -> f64 {
        self.log_evaluate(theta).exp()
    }

    /// Log density, stable far from all samples.
    pub fn log_evaluate(&self, theta: &[f64]) -> f64 {
        let norm: f64 = self.bandwidth.iter().map(|h| h.ln() + LN_SQRT_2PI).sum();
        let terms: Vec<f64> = self
            .points
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, w)| {
                let q: f64 = x
                    .iter()
                    .zip(theta)
                    .zip(&self.bandwidth)
                    .map(|((a, b), h)| ((a - b) / h).powi(2))
                    .sum();
                w.ln() - 0.5 * q
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln() - norm
    }

    /// One-dimensional marginal along coordinate `j`.
    pub fn marginal(&self, j: usize) -> Kde {
        Kde {
            points: self.points.iter().map(|x| vec![x[j]]).collect(),
            weights: self.weights.clone(),
            bandwidth: vec![self.bandwidth[j]],
        }
    }

    /// Argmax of a 1-D KDE over an evenly spaced grid on `[lo, hi]` and the
    /// sample locations inside it. Samples are candidates because a narrow
    /// kernel can peak between grid points.
    pub fn mode_on_grid(&self, lo: f64, hi: f64, n: usize) -> f64 {
        assert_eq!(self.bandwidth.len(), 1, "mode_on_grid needs a 1-D estimate");
        let n = n.max(2);
        let grid = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
        let samples = self
            .points
            .iter()
            .zip(&self.weights)
            .filter(|(x, w)| **w > 0.0 && x[0] >= lo && x[0] <= hi)
            .map(|(x, _)| x[0]);
        grid.chain(samples)
            .map(|x| (x, self.log_evaluate(&[x])))
            .fold(
                (lo, f64::NEG_INFINITY),
                |a, b| if b.1 > a.1 { b } else { a },
            )
            .0
    }
}

/// Weighted KDE at `theta` with diagonal bandwidth.
pub fn kde_evaluate(samples: &WeightedSampleSet, bandwidth: &[f64], theta: &[f64]) -> Result<f64> {
    Ok(Kde::new(samples, bandwidth.to_vec())?.evaluate(theta))
}

/// Result of comparing the surrogate's L2 error with the GP's second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    /// Quadrature of `(U(theta) - q(theta))^2`.
    pub lhs: f64,
    /// Quadrature of `E[(f(theta) - g(theta))^2] = (m - g)^2 + s2`.
    pub rhs: f64,
    /// The same quantity estimated with Monte Carlo draws of `f(theta)`.
    pub rhs_monte_carlo: f64,
    /// `m + s2 < -1/2` at every node.
    pub precondition: bool,
}

/// Checks `|U - q|_2^2 <= E|f - g|_2^2` for the exp map, where `g` is the
/// centered log-density the GP was trained on and `q = exp(g)`.
pub fn ujb_l2_gap_check<G>(
    posterior: &GpPosterior,
    g: G,
    domain: &Domain,
    n_nodes: usize,
    gp_draws: usize,
    seed: u64,
) -> Result<GapCheck>
where
    G: Fn(&[f64]) -> f64,
{
    if n_nodes == 0 {
        return Err(Error::EmptyInput("gap-check nodes"));
    }
    let nodes = halton_nodes(domain, n_nodes);
    let scale = domain.volume() / n_nodes as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lhs, mut rhs, mut rhs_mc) = (0.0, 0.0, 0.0);
    let mut precondition = true;
    for x in &nodes {
        let (m, s2) = posterior.predict(x);
        let gx = g(x);
        let u = (m + 0.5 * s2).exp();
        lhs += (u - gx.exp()).powi(2);
        rhs += (m - gx).powi(2) + s2;
        if gp_draws > 0 {
            let s = s2.sqrt();
            let mut acc = 0.0;
            for _ in 0..gp_draws {
                let z: f64 = StandardNormal.sample(&mut rng);
                acc += (m + s * z - gx).powi(2);
            }
            rhs_mc += acc / gp_draws as f64;
        }
        precondition &= m + s2 < -0.5;
    }
    Ok(GapCheck {
        lhs: lhs * scale,
        rhs: rhs * scale,
        rhs_monte_carlo: rhs_mc * scale,
        precondition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tvd_of_shifted_unit_gaussians() {
        let d = Domain::new(vec![-8.0], vec![9.0]).unwrap();
        let t = tvd_numeric(
            |x| -0.5 * x[0] * x[0],
            |x| -0.5 * (x[0] - 1.0).powi(2),
            &d,
            10_000,
        )
        .unwrap();
        let exact = 2.0 * crate::special::normal_cdf(0.5) - 1.0;
        assert!((t - exact).abs() < 1e-3, "{t} vs {exact}");
    }

    #[test]
    fn tvd_ignores_constants_and_saturates_on_disjoint_support() {
        let d = Domain::cube(1, 0.0, 1.0).unwrap();
        let t = tvd_numeric(|x| x[0].sin(), |x| x[0].sin() + 7.0, &d, 1000).unwrap();
        assert!(t < 1e-12);
        let t = tvd_numeric(
            |x| if x[0] < 0.5 { 0.0 } else { -800.0 },
            |x| if x[0] < 0.5 { -800.0 } else { 0.0 },
            &d,
            1000,
        )
        .unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kde_single_bump_and_invisible_zero_weight() {
        let s = WeightedSampleSet::from_log_ratios(
            vec![vec![0.0], vec![5.0]],
            vec![0.0, f64::NEG_INFINITY],
        )
        .unwrap();
        let k = Kde::new(&s, vec![0.5]).unwrap();
        let peak = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((k.evaluate(&[0.0]) - peak).abs() < 1e-12);
        assert!(k.evaluate(&[5.0]) < 1e-20);
        assert!((k.mode_on_grid(-2.0, 6.0, 801)).abs() < 1e-9);
    }

    #[test]
    fn mode_finds_a_spike_between_grid_points() {
        let s =
            WeightedSampleSet::from_log_ratios(vec![vec![3.1234], vec![7.0]], vec![0.0, -400.0])
                .unwrap();
        let k = Kde::silverman(&s).unwrap();
        assert_eq!(k.marginal(0).mode_on_grid(0.0, 10.0, 2001), 3.1234);
    }
}
