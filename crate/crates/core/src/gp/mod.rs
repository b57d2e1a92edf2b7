//! Gaussian-process regression with a Gaussian kernel.
//!
//! The posterior keeps the Cholesky factor of `K + (noise + jitter) I` and the
//! whitened residual `w = L^{-1}(y - m)`, so for a query point with
//! `v = L^{-1} k_n(theta)` the mean is `m(theta) + v.w` and the variance is
//! `k(theta, theta) - v.v`. Callers scanning a fixed candidate set can cache
//! `v` and extend it when the factor grows by one row.

mod mle;

pub use mle::{mle_fit, Hyperparameters, MleConfig, NoiseMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;

pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Initial diagonal jitter relative to the kernel variance.
pub const JITTER_START: f64 = 1e-8;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-2;

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Subtracts the maximum from every value. Returns `(offset, centered)`;
/// predictions on the centered scale are moved back by adding `offset`.
pub fn center_outputs(values: &[f64]) -> (f64, Vec<f64>) {
    let offset = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (offset, values.iter().map(|v| v - offset).collect())
}

/// Gaussian kernel `variance * exp(-|a - b|^2 / (2 lengthscale^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub lengthscale: f64,
    pub variance: f64,
}

impl KernelSpec {
    pub fn new(lengthscale: f64, variance: f64) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lengthscale {lengthscale}"
            )));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kernel variance {variance}"
            )));
        }
        Ok(Self {
            lengthscale,
            variance,
        })
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.eval_sq_dist(sq_dist(a, b))
    }

    #[inline]
    pub fn eval_sq_dist(&self, d2: f64) -> f64 {
        self.variance * (-0.5 * d2 / (self.lengthscale * self.lengthscale)).exp()
    }
}

/// Shape of the prior mean function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanForm {
    Zero,
    /// Intercept, linear and pure-quadratic terms, no cross terms.
    Quadratic,
}

/// Prior mean function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSpec {
    Zero,
    /// Coefficients ordered `[c, b_1..b_d, a_1..a_d]` for
    /// `c + sum b_i x_i + sum a_i x_i^2`.
    Quadratic {
        coefficients: Vec<f64>,
    },
}

/// Basis `[1, x_1, .., x_d, x_1^2, .., x_d^2]` of the quadratic mean.
pub fn quadratic_basis(theta: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(1 + 2 * theta.len());
    h.push(1.0);
    h.extend_from_slice(theta);
    h.extend(theta.iter().map(|x| x * x));
    h
}

impl MeanSpec {
    pub fn form(&self) -> MeanForm {
        match self {
            MeanSpec::Zero => MeanForm::Zero,
            MeanSpec::Quadratic { .. } => MeanForm::Quadratic,
        }
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            MeanSpec::Zero => 0.0,
            MeanSpec::Quadratic { coefficients } => {
                let d = theta.len();
                debug_assert_eq!(coefficients.len(), 1 + 2 * d);
                let mut s = coefficients[0];
                for (i, x) in theta.iter().enumerate() {
                    s += coefficients[1 + i] * x + coefficients[1 + d + i] * x * x;
                }
                s
            }
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        match self {
            MeanSpec::Zero => &[],
            MeanSpec::Quadratic { coefficients } => coefficients,
        }
    }
}

/// GP prior: mean function and covariance kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpPrior {
    pub mean: MeanSpec,
    pub kernel: KernelSpec,
}

/// Inputs, outputs and observation-noise variance for regression.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    noise_variance: f64,
}

impl TrainingSet {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("training inputs"));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: outputs.len(),
            });
        }
        let d = inputs[0].len();
        if let Some(p) = inputs.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if let Some(y) = outputs.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite output {y}")));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance {noise_variance}"
            )));
        }
        for i in 0..inputs.len() {
            for j in 0..i {
                if inputs[i] == inputs[j] {
                    return Err(Error::InvalidParameter(format!(
                        "duplicate training input at rows {j} and {i}"
                    )));
                }
            }
        }
        Ok(Self {
            inputs,
            outputs,
            noise_variance,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_noise(&self, noise_variance: f64) -> Self {
        Self {
            noise_variance,
            ..self.clone()
        }
    }
}

/// Cholesky factor of `K + (noise + jitter) I` over a growing input set.
#[derive(Debug, Clone)]
pub struct KernelFactor {
    kernel: KernelSpec,
    noise_variance: f64,
    jitter: f64,
    inputs: Vec<Vec<f64>>,
    chol: Cholesky,
}

impl KernelFactor {
    /// Factors the kernel matrix, escalating jitter from `1e-8` to `1e-2`
    /// times the kernel variance.
    pub fn build(kernel: KernelSpec, noise_variance: f64, inputs: Vec<Vec<f64>>) -> Result<Self> {
        let n = inputs.len();
        let mut kmat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = kernel.eval(&inputs[i], &inputs[j]);
                kmat[i * n + j] = k;
                kmat[j * n + i] = k;
            }
        }
        let mut rel = JITTER_START;
        loop {
            let jitter = rel * kernel.variance;
            let add = noise_variance + jitter;
            match Cholesky::factor_with(n, |i, j| kmat[i * n + j] + if i == j { add } else { 0.0 })
            {
                Ok(chol) => {
                    return Ok(Self {
                        kernel,
                        noise_variance,
                        jitter,
                        inputs,
                        chol,
                    })
                }
                Err(e) if rel * 10.0 > JITTER_MAX * (1.0 + 1e-9) => {
                    return Err(Error::Factorization {
                        pivot: e.pivot,
                        jitter,
                    });
                }
                Err(_) => rel *= 10.0,
            }
        }
    }

    /// Adds one input by extending the factor at the current jitter.
    pub fn append(&mut self, point: Vec<f64>) -> Result<()> {
        let cross = self.cross_covariance(&point);
        let diag = self.kernel.variance + self.noise_variance + self.jitter;
        self.chol
            .append(&cross, diag)
            .map_err(|e| Error::Factorization {
                pivot: e.pivot,
                jitter: self.jitter,
            })?;
        self.inputs.push(point);
        Ok(())
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// `k_n(theta)`.
    pub fn cross_covariance(&self, theta: &[f64]) -> Vec<f64> {
        self.inputs
            .iter()
            .map(|x| self.kernel.eval(theta, x))
            .collect()
    }

    /// `L^{-1} k_n(theta)`.
    pub fn whiten(&self, theta: &[f64]) -> Vec<f64> {
        let mut v = self.cross_covariance(theta);
        self.chol.solve_lower_in_place(&mut v);
        v
    }

    /// Extends a whitened vector computed against the first `v.len()` inputs
    /// to cover all current inputs.
    pub fn extend_whitened(&self, theta: &[f64], v: &mut Vec<f64>) {
        for i in v.len()..self.inputs.len() {
            let row = self.chol.row(i);
            let k = self.kernel.eval(theta, &self.inputs[i]);
            let s: f64 = row[..i].iter().zip(v.iter()).map(|(l, x)| l * x).sum();
            v.push((k - s) / row[i]);
        }
    }
}

/// Exact GP posterior.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    mean: MeanSpec,
    factor: KernelFactor,
    outputs: Vec<f64>,
    whitened_residual: Vec<f64>,
    alpha: Vec<f64>,
}

impl GpPosterior {
    /// Conditions `prior` on `training`.
    pub fn fit(prior: &GpPrior, training: &TrainingSet) -> Result<Self> {
        let factor = KernelFactor::build(
            prior.kernel,
            training.noise_variance,
            training.inputs.clone(),
        )?;
        Self::from_factor(factor, prior.mean.clone(), training.outputs.clone())
    }

    /// Posterior with the quadratic (or zero) mean coefficients profiled out
    /// by generalized least squares.
    pub fn fit_profiled(
        kernel: KernelSpec,
        mean_form: MeanForm,
        training: &TrainingSet,
    ) -> Result<Self> {
        let factor = KernelFactor::build(kernel, training.noise_variance, training.inputs.clone())?;
        Self::from_factor_profiled(factor, mean_form, training.outputs.clone())
    }

    pub fn from_factor(factor: KernelFactor, mean: MeanSpec, outputs: Vec<f64>) -> Result<Self> {
        if outputs.len() != factor.len() {
            return Err(Error::DimensionMismatch {
                expected: factor.len(),
                got: outputs.len(),
            });
        }
        let mut w: Vec<f64> = factor
            .inputs
            .iter()
            .zip(&outputs)
            .map(|(x, y)| y - mean.eval(x))
            .collect();
        factor.chol.solve_lower_in_place(&mut w);
        let mut alpha = w.clone();
        factor.chol.solve_upper_in_place(&mut alpha);
        Ok(Self {
            mean,
            factor,
            outputs,
            whitened_residual: w,
            alpha,
        })
    }

    pub fn from_factor_profiled(
        factor: KernelFactor,
        mean_form: MeanForm,
        outputs: Vec<f64>,
    ) -> Result<Self> {
        let mean = match mean_form {
            MeanForm::Zero => MeanSpec::Zero,
            MeanForm::Quadratic => MeanSpec::Quadratic {
                coefficients: gls_coefficients(&factor, &outputs),
            },
        };
        Self::from_factor(factor, mean, outputs)
    }

    pub fn mean_spec(&self) -> &MeanSpec {
        &self.mean
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.factor.kernel
    }

    pub fn factor(&self) -> &KernelFactor {
        &self.factor
    }

    pub fn into_factor(self) -> KernelFactor {
        self.factor
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn predict_mean(&self, theta: &[f64]) -> f64 {
        let k = self.factor.cross_covariance(theta);
        self.mean.eval(theta) + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Posterior variance, clamped at zero.
    pub fn predict_var(&self, theta: &[f64]) -> f64 {
        self.predict(theta).1
    }

    /// `(mean, variance)` at `theta`.
    pub fn predict(&self, theta: &[f64]) -> (f64, f64) {
        let v = self.factor.whiten(theta);
        self.predict_whitened(theta, &v)
    }

    /// Prediction from a precomputed `v = L^{-1} k_n(theta)`.
    #[inline]
    pub fn predict_whitened(&self, theta: &[f64], v: &[f64]) -> (f64, f64) {
        debug_assert_eq!(v.len(), self.len());
        let mut mv = 0.0;
        let mut vv = 0.0;
        for (vi, wi) in v.iter().zip(&self.whitened_residual) {
            mv += vi * wi;
            vv += vi * vi;
        }
        let mean = self.mean.eval(theta) + mv;
        let var = (self.factor.kernel.variance - vv).max(0.0);
        (mean, var)
    }

    /// Unclamped variance, for checking numerical error.
    pub fn predict_var_raw(&self, theta: &[f64]) -> f64 {
        let v = self.factor.whiten(theta);
        self.factor.kernel.variance - v.iter().map(|x| x * x).sum::<f64>()
    }

    /// Gradients of the posterior mean and variance with respect to `theta`.
    pub fn predict_gradient(&self, theta: &[f64]) -> ((f64, Vec<f64>), (f64, Vec<f64>)) {
        let d = theta.len();
        let kern = &self.factor.kernel;
        let inv_l2 = 1.0 / (kern.lengthscale * kern.lengthscale);
        let k = self.factor.cross_covariance(theta);
        let mut v = k.clone();
        self.factor.chol.solve_lower_in_place(&mut v);
        let mut a = v.clone();
        self.factor.chol.solve_upper_in_place(&mut a);

        let mut grad_mean = vec![0.0; d];
        let mut grad_var = vec![0.0; d];
        if let MeanSpec::Quadratic { coefficients } = &self.mean {
            for i in 0..d {
                grad_mean[i] += coefficients[1 + i] + 2.0 * coefficients[1 + d + i] * theta[i];
            }
        }
        for (j, x) in self.factor.inputs.iter().enumerate() {
            // d k(theta, x_j) / d theta = -k (theta - x_j) / l^2
            let scale = -k[j] * inv_l2;
            for i in 0..d {
                let dk = scale * (theta[i] - x[i]);
                grad_mean[i] += self.alpha[j] * dk;
                grad_var[i] -= 2.0 * a[j] * dk;
            }
        }
        let mean =
            self.mean.eval(theta) + k.iter().zip(&self.alpha).map(|(x, y)| x * y).sum::<f64>();
        let var = (kern.variance - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        ((mean, grad_mean), (var, grad_var))
    }

    /// Log evidence of the conditioning data under this posterior's prior.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let quad: f64 = self.whitened_residual.iter().map(|x| x * x).sum();
        -0.5 * quad - 0.5 * self.factor.chol.log_det() - 0.5 * n * LN_2PI
    }
}

/// GLS estimate of the quadratic mean coefficients given a kernel factor.
fn gls_coefficients(factor: &KernelFactor, outputs: &[f64]) -> Vec<f64> {
    let n = factor.len();
    let cols: Vec<Vec<f64>> = factor.inputs.iter().map(|x| quadratic_basis(x)).collect();
    let p = cols[0].len();
    // Whitened design, column-major.
    let mut hw = vec![vec![0.0; n]; p];
    for (i, h) in cols.iter().enumerate() {
        for (c, value) in h.iter().enumerate() {
            hw[c][i] = *value;
        }
    }
    for col in hw.iter_mut() {
        factor.chol.solve_lower_in_place(col);
    }
    let mut yw = outputs.to_vec();
    factor.chol.solve_lower_in_place(&mut yw);

    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for a in 0..p {
        rhs[a] = hw[a].iter().zip(&yw).map(|(x, y)| x * y).sum();
        for b in 0..=a {
            let g: f64 = hw[a].iter().zip(&hw[b]).map(|(x, y)| x * y).sum();
            gram[a * p + b] = g;
            gram[b * p + a] = g;
        }
    }
    // Small ridge keeps the normal equations solvable when n < p.
    let trace: f64 = (0..p).map(|a| gram[a * p + a]).sum();
    let mut ridge = 1e-10 * trace / p as f64 + 1e-300;
    loop {
        if let Ok(c) =
            Cholesky::factor_with(p, |i, j| gram[i * p + j] + if i == j { ridge } else { 0.0 })
        {
            return c.solve(&rhs);
        }
        ridge *= 100.0;
    }
}

/// Log marginal likelihood `log N(y | m, K + (noise + jitter) I)`.
pub fn log_marginal_likelihood(prior: &GpPrior, training: &TrainingSet) -> Result<f64> {
    Ok(GpPosterior::fit(prior, training)?.log_marginal_likelihood())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(l: f64, s2: f64) -> GpPrior {
        GpPrior {
            mean: MeanSpec::Zero,
            kernel: KernelSpec::new(l, s2).unwrap(),
        }
    }

    #[test]
    fn single_point_interpolates() {
        let t = TrainingSet::new(vec![vec![0.3]], vec![2.0], 0.0).unwrap();
        let post = GpPosterior::fit(&prior(1.0, 1.0), &t).unwrap();
        let (m, v) = post.predict(&[0.3]);
        assert!((m - 2.0).abs() < 1e-7);
        assert!(v < 1e-7);
    }

    #[test]
    fn far_points_revert_to_prior() {
        let t = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![3.0, -1.0], 1e-6).unwrap();
        let post = GpPosterior::fit(&prior(0.5, 2.0), &t).unwrap();
        let (m, v) = post.predict(&[50.0]);
        assert!(m.abs() < 1e-12);
        assert!((v - 2.0).abs() < 1e-12);

        let quad = GpPrior {
            mean: MeanSpec::Quadratic {
                coefficients: vec![1.0, 0.5, -0.25],
            },
            kernel: KernelSpec::new(0.5, 2.0).unwrap(),
        };
        let post = GpPosterior::fit(&quad, &t).unwrap();
        let expect = 1.0 + 0.5 * 50.0 - 0.25 * 2500.0;
        assert!((post.predict_mean(&[50.0]) - expect).abs() < 1e-9);
    }

    #[test]
    fn two_point_mean_matches_explicit_inverse() {
        // K = [[1, e^{-1/2}], [e^{-1/2}, 1]] + jitter, y = (0, 1).
        let t = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0], 0.0).unwrap();
        let post = GpPosterior::fit(&prior(1.0, 1.0), &t).unwrap();
        let j = post.factor().jitter();
        let r = (-0.5f64).exp();
        let (a, b) = (1.0 + j, r);
        let det = a * a - b * b;
        // alpha = K^{-1} y
        let alpha = [-b / det, a / det];
        let k = (-0.125f64).exp();
        let expect = k * alpha[0] + k * alpha[1];
        assert!((post.predict_mean(&[0.5]) - expect).abs() < 1e-12);
        assert!((expect - 0.5494).abs() < 1e-3);
    }

    #[test]
    fn evidence_closed_forms() {
        let t0 = TrainingSet::new(vec![vec![0.0]], vec![0.0], 0.0).unwrap();
        let lml = log_marginal_likelihood(&prior(1.0, 1.0), &t0).unwrap();
        assert!((lml + 0.918_938_533_204_672_8).abs() < 1e-7);
        let t1 = TrainingSet::new(vec![vec![0.0]], vec![1.0], 0.0).unwrap();
        let lml = log_marginal_likelihood(&prior(1.0, 1.0), &t1).unwrap();
        assert!((lml + 0.5 + 0.918_938_533_204_672_8).abs() < 1e-7);
    }

    #[test]
    fn training_set_validation() {
        assert!(TrainingSet::new(vec![], vec![], 0.0).is_err());
        assert!(TrainingSet::new(vec![vec![0.0]], vec![f64::NAN], 0.0).is_err());
        assert!(TrainingSet::new(vec![vec![0.0], vec![0.0]], vec![1.0, 2.0], 0.0).is_err());
        assert!(TrainingSet::new(vec![vec![0.0]], vec![1.0], -1.0).is_err());
        assert!(KernelSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn appended_factor_matches_rebuild() {
        let kern = KernelSpec::new(0.7, 1.5).unwrap();
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|i| vec![i as f64 * 0.37, (i as f64).sin()])
            .collect();
        let full = KernelFactor::build(kern, 1e-6, pts.clone()).unwrap();
        let mut grown = KernelFactor::build(kern, 1e-6, pts[..2].to_vec()).unwrap();
        let q = [0.4, 0.1];
        let mut v = grown.whiten(&q);
        for p in &pts[2..] {
            grown.append(p.clone()).unwrap();
        }
        grown.extend_whitened(&q, &mut v);
        let v_full = full.whiten(&q);
        for (a, b) in v.iter().zip(&v_full) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pts: Vec<Vec<f64>> = (0..7)
            .map(|i| vec![(i as f64 * 1.3).cos() * 2.0, i as f64 * 0.4])
            .collect();
        let ys: Vec<f64> = pts
            .iter()
            .map(|p| -(p[0] * p[0] + 0.5 * p[1] * p[1]))
            .collect();
        let t = TrainingSet::new(pts, ys, 1e-6).unwrap();
        let post =
            GpPosterior::fit_profiled(KernelSpec::new(1.1, 3.0).unwrap(), MeanForm::Quadratic, &t)
                .unwrap();
        let x = [0.3, 1.1];
        let ((_, gm), (_, gv)) = post.predict_gradient(&x);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (mp, vp) = post.predict(&xp);
            let (mm, vm) = post.predict(&xm);
            assert!(((mp - mm) / (2.0 * h) - gm[i]).abs() < 1e-5);
            assert!(((vp - vm) / (2.0 * h) - gv[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn profiled_quadratic_mean_recovers_exact_quadratic() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.77).sin() * 3.0, (i as f64 * 1.31).cos() * 3.0])
            .collect();
        let f = |p: &[f64]| 2.0 - 0.5 * p[0] + 0.25 * p[1] - 0.75 * p[0] * p[0] - 0.1 * p[1] * p[1];
        let ys: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        let t = TrainingSet::new(pts, ys, 1e-6).unwrap();
        let post =
            GpPosterior::fit_profiled(KernelSpec::new(0.3, 1.0).unwrap(), MeanForm::Quadratic, &t)
                .unwrap();
        let c = post.mean_spec().coefficients();
        let expect = [2.0, -0.5, 0.25, -0.75, -0.1];
        for (a, b) in c.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-5, "{c:?}");
        }
    }
}
