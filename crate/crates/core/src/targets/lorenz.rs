//! Stochastic two-parameter Lorenz-96 model and its synthetic-likelihood
//! posterior.
//!
//! `dx_k/dt = -x_{k-1} (x_{k-2} - x_{k+1}) - x_k + F - theta_1 - theta_2 x_k + eta_k`
//! with indices modulo `K`, integrated by RK4. The AR(1) forcing `eta` is held
//! constant within each step and updated between steps.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_domain, EvalCounter, TargetDensity};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::lowdisc::Domain;
use crate::rng::{self, derive_seed, purpose};

/// Number of summary statistics.
pub const N_SUMMARIES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzConfig {
    pub n_vars: usize,
    pub forcing: f64,
    pub ar_coefficient: f64,
    pub dt: f64,
    pub steps_per_observation: usize,
    pub n_observations: usize,
    /// Simulated paths per synthetic-likelihood evaluation.
    pub replicates: usize,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            n_vars: 40,
            forcing: 10.0,
            ar_coefficient: 0.4,
            dt: 0.025,
            steps_per_observation: 8,
            n_observations: 20,
            replicates: 10_000,
        }
    }
}

impl LorenzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_vars < 4 {
            return Err(Error::InvalidConfig(
                "Lorenz model needs at least 4 variables".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ar_coefficient) {
            return Err(Error::InvalidConfig(
                "AR coefficient must lie in [0, 1]".into(),
            ));
        }
        if !(self.dt > 0.0) || self.steps_per_observation == 0 || self.n_observations < 2 {
            return Err(Error::InvalidConfig("bad Lorenz time grid".into()));
        }
        if self.replicates < N_SUMMARIES + 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least {} replicates, got {}",
                N_SUMMARIES + 2,
                self.replicates
            )));
        }
        Ok(())
    }

    /// Parameter box `[0, 5] x [0, 0.5]`.
    pub fn default_domain() -> Domain {
        Domain::new(vec![0.0, 0.0], vec![5.0, 0.5]).expect("static domain")
    }

    fn drift(&self, theta: &[f64], x: &[f64], eta: &[f64], out: &mut [f64]) {
        let n = self.n_vars;
        let base = self.forcing - theta[0];
        let damp = 1.0 + theta[1];
        let f = |km2: f64, km1: f64, k: usize, kp1: f64| {
            -km1 * (km2 - kp1) - damp * x[k] + base + eta[k]
        };
        out[0] = f(x[n - 2], x[n - 1], 0, x[1]);
        out[1] = f(x[n - 1], x[0], 1, x[2]);
        for k in 2..n - 1 {
            out[k] = f(x[k - 2], x[k - 1], k, x[k + 1]);
        }
        out[n - 1] = f(x[n - 3], x[n - 2], n - 1, x[0]);
    }

    fn rk4_step(&self, theta: &[f64], x: &mut [f64], eta: &[f64], work: &mut Rk4Work) {
        let h = self.dt;
        let n = self.n_vars;
        self.drift(theta, x, eta, &mut work.k1);
        for i in 0..n {
            work.tmp[i] = x[i] + 0.5 * h * work.k1[i];
        }
        self.drift(theta, &work.tmp, eta, &mut work.k2);
        for i in 0..n {
            work.tmp[i] = x[i] + 0.5 * h * work.k2[i];
        }
        self.drift(theta, &work.tmp, eta, &mut work.k3);
        for i in 0..n {
            work.tmp[i] = x[i] + h * work.k3[i];
        }
        self.drift(theta, &work.tmp, eta, &mut work.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (work.k1[i] + 2.0 * work.k2[i] + 2.0 * work.k3[i] + work.k4[i]);
        }
    }

    /// Path observed every `steps_per_observation` steps after `t = 0`,
    /// time-major: `path[t][k]`. With `rng = None` the forcing is zero.
    pub fn simulate(
        &self,
        theta: &[f64],
        x0: &[f64],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<Vec<f64>>> {
        let n = self.n_vars;
        if x0.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            });
        }
        let innovation = (1.0 - self.ar_coefficient * self.ar_coefficient).sqrt();
        let mut x = x0.to_vec();
        let mut eta = vec![0.0; n];
        if let Some(r) = rng.as_deref_mut() {
            for e in eta.iter_mut() {
                *e = innovation * r.sample::<f64, _>(StandardNormal);
            }
        }
        let mut work = Rk4Work::new(n);
        let mut path = Vec::with_capacity(self.n_observations);
        let mut step = 0;
        for _ in 0..self.n_observations {
            for _ in 0..self.steps_per_observation {
                self.rk4_step(theta, &mut x, &eta, &mut work);
                step += 1;
                if let Some(r) = rng.as_deref_mut() {
                    for e in eta.iter_mut() {
                        *e = self.ar_coefficient * *e
                            + innovation * r.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::SimulationDiverged { step });
            }
            path.push(x.clone());
        }
        Ok(path)
    }
}

struct Rk4Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Work {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// Six statistics of a time-major path, each computed per variable and then
/// averaged over variables: mean, variance, lag-1 autocovariance,
/// `cov(x_k, x_{k+1})`, `cov(x_k(t), x_{k-1}(t+1))`, `cov(x_k(t), x_{k+1}(t+1))`.
/// Covariances use full-series means and divide by `T - 1`.
pub fn summaries(path: &[Vec<f64>]) -> [f64; N_SUMMARIES] {
    let t_len = path.len();
    assert!(t_len >= 2, "summaries need at least two time points");
    let n = path[0].len();
    let tf = t_len as f64;
    let denom = (t_len - 1) as f64;
    let means: Vec<f64> = (0..n)
        .map(|k| path.iter().map(|row| row[k]).sum::<f64>() / tf)
        .collect();
    let mut out = [0.0; N_SUMMARIES];
    for k in 0..n {
        let kp = (k + 1) % n;
        let km = (k + n - 1) % n;
        let d = |t: usize, j: usize| path[t][j] - means[j];
        let mut var = 0.0;
        let mut cross = 0.0;
        for t in 0..t_len {
            var += d(t, k) * d(t, k);
            cross += d(t, k) * d(t, kp);
        }
        let mut auto = 0.0;
        let mut lag_prev = 0.0;
        let mut lag_next = 0.0;
        for t in 0..t_len - 1 {
            auto += d(t, k) * d(t + 1, k);
            lag_prev += d(t, k) * d(t + 1, km);
            lag_next += d(t, k) * d(t + 1, kp);
        }
        out[0] += means[k];
        out[1] += var / denom;
        out[2] += auto / denom;
        out[3] += cross / denom;
        out[4] += lag_prev / denom;
        out[5] += lag_next / denom;
    }
    for v in out.iter_mut() {
        *v /= n as f64;
    }
    out
}

/// `log N(s | mean, cov)` from replicated summaries, with a small ridge if
/// the sample covariance is singular.
pub fn gaussian_synthetic_log_likelihood(
    observed: &[f64; N_SUMMARIES],
    sims: &[[f64; N_SUMMARIES]],
) -> Result<f64> {
    let r = sims.len();
    if r < N_SUMMARIES + 2 {
        return Err(Error::InvalidParameter(format!("too few replicates ({r})")));
    }
    let d = N_SUMMARIES;
    let mut mean = [0.0; N_SUMMARIES];
    for s in sims {
        for i in 0..d {
            mean[i] += s[i];
        }
    }
    for m in mean.iter_mut() {
        *m /= r as f64;
    }
    let mut cov = [0.0; N_SUMMARIES * N_SUMMARIES];
    for s in sims {
        for i in 0..d {
            let di = s[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            cov[i * d + j] /= (r - 1) as f64;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let chol = match Cholesky::factor(&cov, d) {
        Ok(c) => c,
        Err(_) => {
            let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
            let ridge = 1e-8 * trace / d as f64;
            Cholesky::factor_with(d, |i, j| cov[i * d + j] + if i == j { ridge } else { 0.0 })
                .map_err(|_| Error::SingularCovariance)?
        }
    };
    let mut resid: Vec<f64> = (0..d).map(|i| observed[i] - mean[i]).collect();
    chol.solve_lower_in_place(&mut resid);
    let quad: f64 = resid.iter().map(|x| x * x).sum();
    Ok(-0.5 * quad - 0.5 * chol.log_det() - 0.5 * d as f64 * crate::gp::LN_2PI)
}

/// Synthetic-likelihood posterior under a uniform prior on the parameter box.
#[derive(Debug)]
pub struct LorenzPosterior {
    config: LorenzConfig,
    initial_state: Vec<f64>,
    observed: [f64; N_SUMMARIES],
    seed: u64,
    domain: Domain,
    counter: EvalCounter,
}

impl LorenzPosterior {
    pub fn new(
        config: LorenzConfig,
        initial_state: Vec<f64>,
        observed: [f64; N_SUMMARIES],
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if initial_state.len() != config.n_vars {
            return Err(Error::DimensionMismatch {
                expected: config.n_vars,
                got: initial_state.len(),
            });
        }
        Ok(Self {
            config,
            initial_state,
            observed,
            seed,
            domain: LorenzConfig::default_domain(),
            counter: EvalCounter::default(),
        })
    }

    /// Draws the initial state and one observed path at `theta_true`, both
    /// from substreams of `seed`.
    pub fn synthetic(config: LorenzConfig, theta_true: &[f64], seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init_rng = rng::substream(seed, purpose::LORENZ_INITIAL, 0);
        let x0: Vec<f64> = (0..config.n_vars)
            .map(|_| init_rng.sample(StandardNormal))
            .collect();
        let mut obs_rng = rng::substream(seed, purpose::LORENZ_OBSERVED, 0);
        let path = config.simulate(theta_true, &x0, Some(&mut obs_rng))?;
        Self::new(config, x0, summaries(&path), seed)
    }

    pub fn config(&self) -> &LorenzConfig {
        &self.config
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.initial_state
    }

    pub fn observed(&self) -> &[f64; N_SUMMARIES] {
        &self.observed
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Summaries of `replicates` independent paths at `theta`; replicate `r`
    /// of evaluation `key` uses its own substream.
    pub fn simulate_summaries(&self, theta: &[f64], key: u64) -> Result<Vec<[f64; N_SUMMARIES]>> {
        let eval_seed = derive_seed(self.seed, purpose::LORENZ_REPLICATE, key);
        (0..self.config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = rng::substream(eval_seed, purpose::LORENZ_REPLICATE, r);
                let path = self
                    .config
                    .simulate(theta, &self.initial_state, Some(&mut rng))?;
                Ok(summaries(&path))
            })
            .collect()
    }
}

impl TargetDensity for LorenzPosterior {
    fn name(&self) -> &str {
        "lorenz"
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn log_q_uncounted(&self, theta: &[f64], key: u64) -> Result<f64> {
        check_domain(&self.domain, theta)?;
        let sims = self.simulate_summaries(theta, key)?;
        gaussian_synthetic_log_likelihood(&self.observed, &sims)
    }
}
