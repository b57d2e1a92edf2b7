//! Hyperrectangular domains, Halton proposal streams and star discrepancy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("zero-dimensional domain".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (i, (a, b)) in lower.iter().zip(&upper).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidDomain(format!(
                    "coordinate {i}: lower {a} must be below upper {b}"
                )));
            }
        }
        let domain = Self { lower, upper };
        let vol = domain.volume();
        if !(vol.is_finite() && vol > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "volume {vol} not finite and positive"
            )));
        }
        Ok(domain)
    }

    /// The same interval `[lower, upper]` on every coordinate.
    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn log_volume(&self) -> f64 {
        self.widths().iter().map(|w| w.ln()).sum()
    }

    /// Length of the main diagonal.
    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Closed-box membership.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (a, b))| *x >= *a && *x <= *b)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (x, (a, b)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*a, *b);
        }
    }
}

/// The first `count` primes.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| candidate % p != 0)
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|p| p * p <= n).all(|p| n % p != 0)
}

/// Base-`base` radical inverse of `index`, exact while `base^digits < 2^53`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut numerator: u128 = 0;
    let mut denominator: u128 = 1;
    let b = base as u128;
    while index > 0 {
        numerator = numerator * b + (index % base) as u128;
        denominator *= b;
        index /= base;
    }
    numerator as f64 / denominator as f64
}

/// Halton point with the given index (`index >= 1`) and per-coordinate bases.
pub fn halton_point(index: u64, bases: &[u64]) -> Vec<f64> {
    debug_assert!(index >= 1, "Halton indices start at 1");
    bases.iter().map(|&b| radical_inverse(index, b)).collect()
}

/// Affine map from the unit cube to `domain`.
pub fn scale_to_domain(eta: &[f64], domain: &Domain) -> Result<Vec<f64>> {
    if eta.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: eta.len(),
        });
    }
    Ok(eta
        .iter()
        .zip(domain.lower.iter().zip(&domain.upper))
        .map(|(e, (a, b))| a + (b - a) * e)
        .collect())
}

/// A sequence of points in `[0,1)^d` consumed one at a time.
pub trait ProposalStream: Send {
    fn dim(&self) -> usize;

    /// 1-based index of the next point to be emitted.
    fn position(&self) -> u64;

    fn next_unit(&mut self) -> Vec<f64>;
}

/// Unscrambled Halton sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltonStream {
    bases: Vec<u64>,
    cursor: u64,
}

impl HaltonStream {
    /// Stream over the first `dim` primes, starting at index 1.
    pub fn new(dim: usize) -> Self {
        Self {
            bases: first_primes(dim),
            cursor: 1,
        }
    }

    pub fn with_bases(bases: Vec<u64>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::EmptyInput("Halton bases"));
        }
        for (i, &b) in bases.iter().enumerate() {
            if !is_prime(b) {
                return Err(Error::InvalidParameter(format!(
                    "Halton base {b} is not prime"
                )));
            }
            if bases[..i].contains(&b) {
                return Err(Error::InvalidParameter(format!("Halton base {b} repeated")));
            }
        }
        Ok(Self { bases, cursor: 1 })
    }

    /// Moves the cursor so the next emitted point has index `cursor`.
    pub fn starting_at(mut self, cursor: u64) -> Self {
        assert!(cursor >= 1, "Halton indices start at 1");
        self.cursor = cursor;
        self
    }

    pub fn bases(&self) -> &[u64] {
        &self.bases
    }
}

impl ProposalStream for HaltonStream {
    fn dim(&self) -> usize {
        self.bases.len()
    }

    fn position(&self) -> u64 {
        self.cursor
    }

    fn next_unit(&mut self) -> Vec<f64> {
        let p = halton_point(self.cursor, &self.bases);
        self.cursor += 1;
        p
    }
}

impl Iterator for HaltonStream {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.next_unit())
    }
}

/// I.i.d. uniform points on the unit cube from a seeded generator.
#[derive(Debug, Clone)]
pub struct UniformStream {
    dim: usize,
    cursor: u64,
    rng: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            cursor: 1,
            rng: rng::substream(seed, rng::purpose::PROPOSAL, 0),
        }
    }
}

impl ProposalStream for UniformStream {
    fn dim(&self) -> usize {
        self.dim
    }

    fn position(&self) -> u64 {
        self.cursor
    }

    fn next_unit(&mut self) -> Vec<f64> {
        self.cursor += 1;
        (0..self.dim).map(|_| self.rng.random::<f64>()).collect()
    }
}

/// A unit-cube stream mapped onto a domain, tagging each point with its index.
pub struct ScaledStream {
    stream: Box<dyn ProposalStream>,
    domain: Domain,
}

impl ScaledStream {
    pub fn new(stream: Box<dyn ProposalStream>, domain: Domain) -> Result<Self> {
        if stream.dim() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: stream.dim(),
            });
        }
        Ok(Self { stream, domain })
    }

    pub fn halton(domain: &Domain) -> Self {
        Self {
            stream: Box::new(HaltonStream::new(domain.dim())),
            domain: domain.clone(),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn position(&self) -> u64 {
        self.stream.position()
    }

    /// Next `(index, point)` pair.
    pub fn next_point(&mut self) -> (u64, Vec<f64>) {
        let index = self.stream.position();
        let eta = self.stream.next_unit();
        let theta = scale_to_domain(&eta, &self.domain).expect("stream and domain dims agree");
        (index, theta)
    }
}

/// Exact star discrepancy of a 1-D point set over anchored intervals.
pub fn star_discrepancy_1d(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("star discrepancy points"));
    }
    if let Some(&bad) = points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::OutOfDomain { point: vec![bad] });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / n - x;
            let below = x - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max))
}

/// Grid lower bound on the star discrepancy in dimension `d <= 3`.
///
/// Anchored boxes `[0, t]` and `[0, t)` are scanned with corners `t` on the
/// lattice `{0, 1/r, ..., 1}^d`. The result is a lower bound on the exact
/// value and converges to it as `resolution` grows.
pub fn star_discrepancy_grid(points: &[Vec<f64>], resolution: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyInput("star discrepancy points"));
    }
    let dim = points[0].len();
    if dim == 0 || dim > 3 {
        return Err(Error::DimensionTooLarge { dim, max: 3 });
    }
    if resolution < 2 {
        return Err(Error::InvalidParameter(
            "grid resolution must be at least 2".into(),
        ));
    }
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::OutOfDomain { point: p.clone() });
        }
    }
    let r = resolution;
    let side = r + 1;
    let cells = side.pow(dim as u32);
    // closed[j]: points with x <= t_j in every coordinate; open: x < t_j.
    let mut closed = vec![0u32; cells];
    let mut open = vec![0u32; cells];
    for p in points {
        let mut ci = 0usize;
        let mut oi = 0usize;
        let mut open_valid = true;
        for &x in p.iter().rev() {
            let scaled = x * r as f64;
            let c = scaled.ceil() as usize;
            let o = scaled.floor() as usize + 1;
            ci = ci * side + c.min(r);
            if o > r {
                open_valid = false;
            }
            oi = oi * side + o.min(r);
        }
        closed[ci] += 1;
        if open_valid {
            open[oi] += 1;
        }
    }
    let strides: Vec<usize> = (0..dim).map(|k| side.pow(k as u32)).collect();
    for counts in [&mut closed, &mut open] {
        for &stride in &strides {
            for idx in 0..cells {
                if (idx / stride) % side > 0 {
                    counts[idx] += counts[idx - stride];
                }
            }
        }
    }
    let n = points.len() as f64;
    let mut worst = 0.0f64;
    for idx in 0..cells {
        let mut vol = 1.0;
        let mut rem = idx;
        for _ in 0..dim {
            vol *= (rem % side) as f64 / r as f64;
            rem /= side;
        }
        worst = worst
            .max((closed[idx] as f64 / n - vol).abs())
            .max((open[idx] as f64 / n - vol).abs());
    }
    Ok(worst)
}
