//! Maximum mean discrepancy between weighted point sets under the Gaussian
//! kernel `exp(-0.5 |x - y|^2 / h)`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::sq_dist;
use crate::sampler::WeightedSampleSet;

/// Kernel values below this are treated as zero by the cell-list evaluator.
const KERNEL_FLOOR: f64 = 1e-20;
/// Reference weights below this (sets are normalized) are dropped.
const WEIGHT_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdKernel {
    pub bandwidth: f64,
}

impl Default for MmdKernel {
    fn default() -> Self {
        Self { bandwidth: 0.1 }
    }
}

impl MmdKernel {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "MMD bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (-0.5 * sq_dist(a, b) / self.bandwidth).exp()
    }

    /// Distance beyond which the kernel is below `KERNEL_FLOOR`.
    pub fn cutoff(&self) -> f64 {
        (2.0 * self.bandwidth * -KERNEL_FLOOR.ln()).sqrt()
    }
}

fn check(a: &WeightedSampleSet, b: &WeightedSampleSet) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("MMD sample set"));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

fn weighted_gram(
    kernel: &MmdKernel,
    xa: &[Vec<f64>],
    wa: &[f64],
    xb: &[Vec<f64>],
    wb: &[f64],
) -> f64 {
    let row = |i: usize| -> f64 {
        if wa[i] == 0.0 {
            return 0.0;
        }
        wa[i]
            * xb.iter()
                .zip(wb)
                .filter(|(_, w)| **w != 0.0)
                .map(|(x, w)| w * kernel.eval(&xa[i], x))
                .sum::<f64>()
    };
    if xa.len() * xb.len() > 1 << 20 {
        (0..xa.len()).into_par_iter().map(row).sum()
    } else {
        (0..xa.len()).map(row).sum()
    }
}

/// Squared MMD (V-statistic with self terms), clamped at zero.
pub fn mmd_squared(
    a: &WeightedSampleSet,
    b: &WeightedSampleSet,
    kernel: &MmdKernel,
) -> Result<f64> {
    check(a, b)?;
    let aa = weighted_gram(kernel, &a.points, &a.weights, &a.points, &a.weights);
    let bb = weighted_gram(kernel, &b.points, &b.weights, &b.points, &b.weights);
    let ab = weighted_gram(kernel, &a.points, &a.weights, &b.points, &b.weights);
    Ok((aa - 2.0 * ab + bb).max(0.0))
}

/// `sqrt(mmd_squared)`.
pub fn mmd(a: &WeightedSampleSet, b: &WeightedSampleSet, kernel: &MmdKernel) -> Result<f64> {
    Ok(mmd_squared(a, b, kernel)?.sqrt())
}

/// Uniform grid of cells of side `cutoff` holding point indices.
#[derive(Debug, Clone)]
struct CellList {
    cell: f64,
    dim: usize,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl CellList {
    fn new(cell: f64, dim: usize) -> Self {
        Self {
            cell,
            dim,
            cells: HashMap::new(),
        }
    }

    fn key(&self, x: &[f64]) -> Vec<i64> {
        x.iter().map(|v| (v / self.cell).floor() as i64).collect()
    }

    fn insert(&mut self, x: &[f64], id: usize) {
        let k = self.key(x);
        self.cells.entry(k).or_default().push(id);
    }

    /// Calls `f` with every stored id in the `3^d` cells around `x`.
    fn for_neighbours<F: FnMut(usize)>(&self, x: &[f64], mut f: F) {
        let centre = self.key(x);
        let mut offset = vec![-1i64; self.dim];
        let mut key = centre.clone();
        loop {
            for (k, (c, o)) in key.iter_mut().zip(centre.iter().zip(&offset)) {
                *k = c + o;
            }
            if let Some(ids) = self.cells.get(&key) {
                ids.iter().for_each(|&i| f(i));
            }
            let mut j = 0;
            loop {
                if j == self.dim {
                    return;
                }
                offset[j] += 1;
                if offset[j] <= 1 {
                    break;
                }
                offset[j] = -1;
                j += 1;
            }
        }
    }
}

/// A large reference set prepared for repeated MMD queries: negligible
/// weights are dropped, pairs beyond the kernel cutoff are skipped and the
/// reference self term is computed once.
#[derive(Debug, Clone)]
pub struct MmdReference {
    kernel: MmdKernel,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    cells: CellList,
    self_term: f64,
}

impl MmdReference {
    pub fn new(reference: &WeightedSampleSet, kernel: MmdKernel) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyInput("MMD reference"));
        }
        let dim = reference.dim();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (x, &w) in reference.points.iter().zip(&reference.weights) {
            if w >= WEIGHT_FLOOR {
                points.push(x.clone());
                weights.push(w);
            }
        }
        let mut cells = CellList::new(kernel.cutoff(), dim);
        for (i, x) in points.iter().enumerate() {
            cells.insert(x, i);
        }
        let mut r = Self {
            kernel,
            points,
            weights,
            cells,
            self_term: 0.0,
        };
        r.self_term = (0..r.points.len())
            .into_par_iter()
            .map(|i| r.weights[i] * r.cross_unweighted(&r.points[i]))
            .sum();
        Ok(r)
    }

    pub fn kernel(&self) -> &MmdKernel {
        &self.kernel
    }

    /// Number of reference atoms kept after pruning.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn self_term(&self) -> f64 {
        self.self_term
    }

    /// `sum_j w_j k(x, y_j)` over the reference.
    pub fn cross_unweighted(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        self.cells.for_neighbours(x, |j| {
            s += self.weights[j] * self.kernel.eval(x, &self.points[j])
        });
        s
    }

    /// Squared MMD of a weighted set against the reference.
    pub fn mmd_squared(&self, a: &WeightedSampleSet) -> Result<f64> {
        if a.is_empty() {
            return Err(Error::EmptyInput("MMD sample set"));
        }
        if a.dim() != self.cells.dim {
            return Err(Error::DimensionMismatch {
                expected: self.cells.dim,
                got: a.dim(),
            });
        }
        let aa = weighted_gram(&self.kernel, &a.points, &a.weights, &a.points, &a.weights);
        let ab: f64 = a
            .points
            .iter()
            .zip(&a.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(x, w)| w * self.cross_unweighted(x))
            .sum();
        Ok((aa - 2.0 * ab + self.self_term).max(0.0))
    }

    pub fn mmd(&self, a: &WeightedSampleSet) -> Result<f64> {
        Ok(self.mmd_squared(a)?.sqrt())
    }

    /// MMD of every prefix of a stream of `(point, log ratio)` pairs, each
    /// prefix self-normalized, in one pass.
    pub fn prefix_tracker(&self) -> PrefixMmd<'_> {
        PrefixMmd {
            reference: self,
            points: Vec::new(),
            log_ratios: Vec::new(),
            cells: CellList::new(self.kernel.cutoff(), self.cells.dim),
            shift: f64::NEG_INFINITY,
            sum_w: 0.0,
            aa: 0.0,
            ab: 0.0,
        }
    }
}

/// Incremental MMD for growing prefixes. Sums are kept for unnormalized
/// weights `exp(l - shift)` and rescaled when the running maximum moves.
pub struct PrefixMmd<'a> {
    reference: &'a MmdReference,
    points: Vec<Vec<f64>>,
    log_ratios: Vec<f64>,
    cells: CellList,
    shift: f64,
    sum_w: f64,
    aa: f64,
    ab: f64,
}

impl PrefixMmd<'_> {
    /// Adds one atom and returns the MMD of the prefix so far.
    pub fn push(&mut self, point: Vec<f64>, log_ratio: f64) -> f64 {
        if crate::targets::is_sentinel(log_ratio) || !log_ratio.is_finite() {
            return self.current();
        }
        if log_ratio > self.shift {
            if self.shift.is_finite() {
                let s = (self.shift - log_ratio).exp();
                self.sum_w *= s;
                self.ab *= s;
                self.aa *= s * s;
            }
            self.shift = log_ratio;
        }
        let relative_floor = (WEIGHT_FLOOR * 1e-3).ln();
        let w = (log_ratio - self.shift).exp();
        let id = self.points.len();
        self.points.push(point);
        self.log_ratios.push(log_ratio);
        self.sum_w += w;
        if log_ratio - self.shift < relative_floor {
            return self.current();
        }
        let x = &self.points[id];
        let mut cross = 0.0;
        self.cells.for_neighbours(x, |j| {
            let wj = (self.log_ratios[j] - self.shift).exp();
            cross += wj * self.reference.kernel.eval(x, &self.points[j]);
        });
        self.aa += w * w + 2.0 * w * cross;
        self.ab += w * self.reference.cross_unweighted(x);
        self.cells.insert(x, id);
        self.current()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn current(&self) -> f64 {
        if !(self.sum_w > 0.0) {
            return f64::NAN;
        }
        let z = self.sum_w;
        (self.aa / (z * z) - 2.0 * self.ab / z + self.reference.self_term)
            .max(0.0)
            .sqrt()
    }
}
