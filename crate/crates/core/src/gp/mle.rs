//! Maximum-likelihood hyperparameter search.
//!
//! Multi-start Nelder-Mead over `(log l, log s2_f[, log s2_obs])` inside a
//! box. Quadratic mean coefficients are profiled out by GLS at every
//! likelihood evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    quadratic_basis, sq_dist, GpPosterior, KernelFactor, KernelSpec, MeanForm, TrainingSet,
};
use super::{JITTER_MAX, JITTER_START, LN_2PI};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::lowdisc::Domain;
use crate::rng;

/// How the observation-noise variance is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum NoiseMode {
    Fixed { variance: f64 },
    Estimate { log_lower: f64, log_upper: f64 },
}

/// Fitted GP hyperparameters; positive quantities in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub log_lengthscale: f64,
    pub log_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mean_coefficients: Vec<f64>,
}

impl Hyperparameters {
    pub fn new(lengthscale: f64, variance: f64) -> Self {
        Self {
            log_lengthscale: lengthscale.ln(),
            log_variance: variance.ln(),
            log_noise: None,
            mean_coefficients: Vec::new(),
        }
    }

    pub fn kernel(&self) -> KernelSpec {
        KernelSpec {
            lengthscale: self.log_lengthscale.exp(),
            variance: self.log_variance.exp(),
        }
    }

    /// Estimated noise if present, otherwise `default`.
    pub fn noise_variance_or(&self, default: f64) -> f64 {
        self.log_noise.map_or(default, f64::exp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub restarts: usize,
    pub max_evals_per_restart: usize,
    pub log_lengthscale_bounds: (f64, f64),
    pub log_variance_bounds: (f64, f64),
    /// Shift the variance box by `ln max(1, var(y))` so it follows the
    /// output scale.
    #[serde(default = "yes")]
    pub scale_variance_bounds: bool,
    pub noise: NoiseMode,
}

fn yes() -> bool {
    true
}

impl MleConfig {
    /// Default search box: `l` in `[0.01, 2] x` the domain diagonal,
    /// `log s2_f` in `[-6, 8]` before the output-scale shift, fixed noise
    /// `1e-6`, eight restarts.
    pub fn for_domain(domain: &Domain) -> Self {
        let diam = domain.diameter();
        Self {
            restarts: 8,
            max_evals_per_restart: 200,
            log_lengthscale_bounds: ((0.01 * diam).ln(), (2.0 * diam).ln()),
            log_variance_bounds: (-6.0, 8.0),
            scale_variance_bounds: true,
            noise: NoiseMode::Fixed { variance: 1e-6 },
        }
    }

    /// Search box for the given outputs.
    pub fn bounds(&self, outputs: &[f64]) -> Vec<(f64, f64)> {
        let (lo, hi) = self.log_variance_bounds;
        let shift = if self.scale_variance_bounds && outputs.len() > 1 {
            let n = outputs.len() as f64;
            let mean = outputs.iter().sum::<f64>() / n;
            let var = outputs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
            var.max(1.0).ln()
        } else {
            0.0
        };
        let mut b = vec![self.log_lengthscale_bounds, (lo + shift, hi + shift)];
        if let NoiseMode::Estimate {
            log_lower,
            log_upper,
        } = self.noise
        {
            b.push((log_lower, log_upper));
        }
        b
    }
}

/// Evidence evaluator with distances and mean basis cached.
struct Evidence<'a> {
    n: usize,
    sq_dists: Vec<f64>,
    basis: Option<Vec<Vec<f64>>>,
    outputs: &'a [f64],
}

impl<'a> Evidence<'a> {
    fn new(training: &'a TrainingSet, mean_form: MeanForm) -> Self {
        let xs = training.inputs();
        let n = xs.len();
        let mut sq_dists = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = sq_dist(&xs[i], &xs[j]);
                sq_dists[i * n + j] = d;
                sq_dists[j * n + i] = d;
            }
        }
        let basis = match mean_form {
            MeanForm::Zero => None,
            MeanForm::Quadratic => {
                let rows: Vec<Vec<f64>> = xs.iter().map(|x| quadratic_basis(x)).collect();
                let p = rows[0].len();
                Some(
                    (0..p)
                        .map(|c| rows.iter().map(|r| r[c]).collect())
                        .collect(),
                )
            }
        };
        Self {
            n,
            sq_dists,
            basis,
            outputs: training.outputs(),
        }
    }

    fn factor(&self, kernel: &KernelSpec, noise: f64) -> Option<Cholesky> {
        let n = self.n;
        let inv = -0.5 / (kernel.lengthscale * kernel.lengthscale);
        let mut rel = JITTER_START;
        while rel <= JITTER_MAX * (1.0 + 1e-9) {
            let add = noise + rel * kernel.variance;
            let f = Cholesky::factor_with(n, |i, j| {
                let k = kernel.variance * (inv * self.sq_dists[i * n + j]).exp();
                if i == j {
                    k + add
                } else {
                    k
                }
            });
            if let Ok(c) = f {
                return Some(c);
            }
            rel *= 10.0;
        }
        None
    }

    fn log_likelihood(&self, kernel: &KernelSpec, noise: f64) -> f64 {
        let Some(chol) = self.factor(kernel, noise) else {
            return f64::NEG_INFINITY;
        };
        let mut yw = self.outputs.to_vec();
        chol.solve_lower_in_place(&mut yw);
        let quad = match &self.basis {
            None => yw.iter().map(|x| x * x).sum::<f64>(),
            Some(cols) => {
                let hw: Vec<Vec<f64>> = cols
                    .iter()
                    .map(|c| {
                        let mut c = c.clone();
                        chol.solve_lower_in_place(&mut c);
                        c
                    })
                    .collect();
                let p = hw.len();
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
                let trace: f64 = (0..p).map(|a| gram[a * p + a]).sum();
                let ridge = 1e-10 * trace / p as f64 + 1e-300;
                let Ok(g) = Cholesky::factor_with(p, |i, j| {
                    gram[i * p + j] + if i == j { ridge } else { 0.0 }
                }) else {
                    return f64::NEG_INFINITY;
                };
                let beta = g.solve(&rhs);
                let mut r = yw.clone();
                for (a, col) in hw.iter().enumerate() {
                    for (ri, h) in r.iter_mut().zip(col) {
                        *ri -= beta[a] * h;
                    }
                }
                r.iter().map(|x| x * x).sum::<f64>()
            }
        };
        let lml = -0.5 * quad - 0.5 * chol.log_det() - 0.5 * self.n as f64 * LN_2PI;
        if lml.is_finite() {
            lml
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn unpack(x: &[f64], config: &MleConfig) -> (KernelSpec, f64) {
    let kernel = KernelSpec {
        lengthscale: x[0].exp(),
        variance: x[1].exp(),
    };
    let noise = match config.noise {
        NoiseMode::Fixed { variance } => variance,
        NoiseMode::Estimate { .. } => x[2].exp(),
    };
    (kernel, noise)
}

fn project(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, (lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Box-projected Nelder-Mead minimization.
fn nelder_mead<F>(f: &mut F, x0: &[f64], bounds: &[(f64, f64)], max_evals: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut start = x0.to_vec();
    project(&mut start, bounds);
    simplex.push(start.clone());
    for i in 0..d {
        let (lo, hi) = bounds[i];
        let step = 0.1 * (hi - lo);
        let mut v = start.clone();
        v[i] = if v[i] + step <= hi {
            v[i] + step
        } else {
            v[i] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = d + 1;

    while evals < max_evals {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[d] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|v| sq_dist(v, &simplex[0]).sqrt())
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread.abs() < 1e-9 * (1.0 + values[0].abs())) || size < 1e-7 {
            break;
        }

        let mut centroid = vec![0.0; d];
        for v in &simplex[..d] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            project(&mut p, bounds);
            p
        };

        let reflected = along(-1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[d] = expanded;
                values[d] = fe;
            } else {
                simplex[d] = reflected;
                values[d] = fr;
            }
        } else if fr < values[d - 1] {
            simplex[d] = reflected;
            values[d] = fr;
        } else {
            let contracted = if fr < values[d] {
                along(-0.5)
            } else {
                along(0.5)
            };
            let fc = f(&contracted);
            evals += 1;
            if fc < values[d].min(fr) {
                simplex[d] = contracted;
                values[d] = fc;
            } else {
                let best = simplex[0].clone();
                for k in 1..=d {
                    for (x, b) in simplex[k].iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    values[k] = f(&simplex[k]);
                    evals += 1;
                }
            }
        }
    }
    let best = (0..=d)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    (simplex[best].clone(), values[best])
}

/// Maximizes the GP evidence over the configured box.
///
/// The first restart begins at `warm_start` (or the box centre), the others
/// at seeded uniform positions. Fails only when no restart produced a finite
/// likelihood; callers then keep their previous hyperparameters.
pub fn mle_fit(
    training: &TrainingSet,
    mean_form: MeanForm,
    config: &MleConfig,
    seed: u64,
    warm_start: Option<&Hyperparameters>,
) -> Result<(Hyperparameters, GpPosterior)> {
    if training.len() < 2 {
        return Err(Error::InvalidParameter(
            "MLE needs at least two training points".into(),
        ));
    }
    let bounds = config.bounds(&training.outputs);
    let evidence = Evidence::new(training, mean_form);
    let mut objective = |x: &[f64]| {
        let (k, noise) = unpack(x, config);
        -evidence.log_likelihood(&k, noise)
    };

    let mut restart_rng = rng::substream(seed, rng::purpose::MLE_RESTARTS, training.len() as u64);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in 0..config.restarts.max(1) {
        let x0: Vec<f64> = if r == 0 {
            match warm_start {
                Some(h) => {
                    let mut v = vec![h.log_lengthscale, h.log_variance];
                    if let NoiseMode::Estimate {
                        log_lower,
                        log_upper,
                    } = config.noise
                    {
                        v.push(h.log_noise.unwrap_or(0.5 * (log_lower + log_upper)));
                    }
                    v
                }
                None => bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect(),
            }
        } else {
            bounds
                .iter()
                .map(|(lo, hi)| restart_rng.random_range(*lo..*hi))
                .collect()
        };
        let (x, fx) = nelder_mead(&mut objective, &x0, &bounds, config.max_evals_per_restart);
        if fx.is_finite() && best.as_ref().is_none_or(|(_, fb)| fx < *fb) {
            best = Some((x, fx));
        }
    }
    let (x, _) = best.ok_or(Error::HyperparameterSearch {
        restarts: config.restarts,
    })?;
    let (kernel, noise) = unpack(&x, config);
    let factor = KernelFactor::build(kernel, noise, training.inputs().to_vec())?;
    let posterior =
        GpPosterior::from_factor_profiled(factor, mean_form, training.outputs().to_vec())?;
    let hyper = Hyperparameters {
        log_lengthscale: x[0],
        log_variance: x[1],
        log_noise: match config.noise {
            NoiseMode::Fixed { .. } => None,
            NoiseMode::Estimate { .. } => Some(x[2]),
        },
        mean_coefficients: posterior.mean_spec().coefficients().to_vec(),
    };
    Ok((hyper, posterior))
}
