//! The g-and-k distribution and its exact-likelihood posterior.
//!
//! Everything is computed in terms of the normal score `z = Phi^{-1}(u)`:
//! `Q(z) = a + b z (1 + c tanh(g z / 2)) (1 + z^2)^k`, and the density of a
//! datum `x` is `pdf(z) / Q'(z)` at the root of `Q(z) = x`. Working in `z`
//! keeps the tails representable where `u` would round to 0 or 1.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_domain, EvalCounter, TargetDensity, FAILED_LOG_Q};
use crate::error::{Error, Result};
use crate::lowdisc::Domain;
use crate::rng;
use crate::special::{ln_normal_pdf, normal_cdf, normal_pdf, normal_quantile};

/// Default value of the constant `c`.
pub const DEFAULT_C: f64 = 0.8;

/// Smallest `u` treated as interior; inversions beyond are flagged.
pub const U_EPS: f64 = 1e-12;

const MAX_ITERATIONS: usize = 200;
const BISECT_WIDTH: f64 = 1e-3;
const Z_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GandKParams {
    /// Location.
    pub a: f64,
    /// Scale.
    pub b: f64,
    /// Skewness.
    pub g: f64,
    /// Kurtosis.
    pub k: f64,
    pub c: f64,
}

/// Result of inverting the quantile function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub z: f64,
    /// `Phi(z)` clamped to `[U_EPS, 1 - U_EPS]`.
    pub u: f64,
    /// True when the root lies beyond the clamp.
    pub clamped: bool,
}

impl GandKParams {
    /// Parameters from `theta = (a, b, g, k)`, checked for a positive scale and
    /// an increasing quantile function on a grid.
    pub fn new(theta: &[f64], c: f64) -> Result<Self> {
        let p = Self::unchecked(theta, c)?;
        if !(p.b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g-and-k scale must be positive, got {}",
                p.b
            )));
        }
        for i in 0..=64 {
            let z = -8.0 + 0.25 * i as f64;
            if !(p.dq_dz(z) > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "g-and-k quantile not increasing at z = {z} for {theta:?}"
                )));
            }
        }
        Ok(p)
    }

    fn unchecked(theta: &[f64], c: f64) -> Result<Self> {
        if theta.len() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: theta.len(),
            });
        }
        Ok(Self {
            a: theta[0],
            b: theta[1],
            g: theta[2],
            k: theta[3],
            c,
        })
    }

    /// `Q` as a function of the normal score.
    #[inline]
    pub fn quantile_z(&self, z: f64) -> f64 {
        let t = (0.5 * self.g * z).tanh();
        self.a + self.b * z * (1.0 + self.c * t) * (self.k * (z * z).ln_1p()).exp()
    }

    /// `dQ/dz`.
    #[inline]
    pub fn dq_dz(&self, z: f64) -> f64 {
        let t = (0.5 * self.g * z).tanh();
        let z2 = z * z;
        let one_ct = 1.0 + self.c * t;
        let bracket = one_ct * (1.0 + z2)
            + 0.5 * self.c * self.g * z * (1.0 - t * t) * (1.0 + z2)
            + 2.0 * self.k * z2 * one_ct;
        self.b * ((self.k - 1.0) * z2.ln_1p()).exp() * bracket
    }

    /// `Q(u)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        Ok(self.quantile_z(normal_quantile(u)))
    }

    /// `dQ/du = (dQ/dz) / pdf(z)`.
    pub fn quantile_deriv(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        let z = normal_quantile(u);
        let d = self.dq_dz(z) / normal_pdf(z);
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::InvalidParameter(format!(
                "non-positive quantile derivative at u = {u}"
            )))
        }
    }

    /// Solves `Q(z) = x` by bisection followed by safeguarded Newton steps.
    pub fn invert(&self, x: f64) -> Result<Inversion> {
        let z_edge = normal_quantile(1.0 - U_EPS);
        let (mut lo, mut hi) = (-z_edge, z_edge);
        let mut f_lo = self.quantile_z(lo) - x;
        let mut f_hi = self.quantile_z(hi) - x;
        while f_lo > 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo *= 2.0;
            if lo < -Z_LIMIT {
                return Err(Error::NoConvergence { iterations: 0 });
            }
            f_lo = self.quantile_z(lo) - x;
        }
        while f_hi < 0.0 {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            if hi > Z_LIMIT {
                return Err(Error::NoConvergence { iterations: 0 });
            }
            f_hi = self.quantile_z(hi) - x;
        }
        if !(f_lo.is_finite() && f_hi.is_finite()) {
            return Err(Error::NoConvergence { iterations: 0 });
        }

        let tol = 1e-10 * (1.0 + x.abs());
        let mut iterations = 0;
        while hi - lo > BISECT_WIDTH {
            let mid = 0.5 * (lo + hi);
            if self.quantile_z(mid) - x < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        let mut z = 0.5 * (lo + hi);
        loop {
            let f = self.quantile_z(z) - x;
            if f.abs() <= tol || hi - lo <= 4.0 * f64::EPSILON * (1.0 + z.abs()) {
                // One last Newton step is nearly free and squares the error.
                let polished = z - f / self.dq_dz(z);
                if polished.is_finite() && (polished - z).abs() <= hi - lo {
                    z = polished;
                }
                break;
            }
            if f < 0.0 {
                lo = z;
            } else {
                hi = z;
            }
            let step = f / self.dq_dz(z);
            let next = z - step;
            z = if next > lo && next < hi && step.is_finite() {
                next
            } else {
                0.5 * (lo + hi)
            };
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                return Err(Error::NoConvergence { iterations });
            }
        }
        let u = normal_cdf(z);
        let clamped = !(U_EPS..=1.0 - U_EPS).contains(&u);
        Ok(Inversion {
            z,
            u: u.clamp(U_EPS, 1.0 - U_EPS),
            clamped,
        })
    }

    /// `u` with `Q(u) = x`, clamped to `[U_EPS, 1 - U_EPS]`, and the clamp flag.
    pub fn inverse_quantile(&self, x: f64) -> Result<(f64, bool)> {
        let inv = self.invert(x)?;
        Ok((inv.u, inv.clamped))
    }

    /// `log p(x) = log pdf(z) - log Q'(z)`.
    pub fn log_density(&self, x: f64) -> Result<f64> {
        let inv = self.invert(x)?;
        let d = self.dq_dz(inv.z);
        if !(d > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "non-positive quantile derivative at x = {x}"
            )));
        }
        Ok(ln_normal_pdf(inv.z) - d.ln())
    }

    /// `n` draws by inverse-transform sampling.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(U_EPS..1.0 - U_EPS);
                self.quantile_z(normal_quantile(u))
            })
            .collect()
    }
}

fn check_unit(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "u must lie in (0, 1), got {u}"
        )))
    }
}

/// The g-and-k model with a fixed `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GandK {
    pub c: f64,
}

impl Default for GandK {
    fn default() -> Self {
        Self { c: DEFAULT_C }
    }
}

impl GandK {
    pub fn params(&self, theta: &[f64]) -> Result<GandKParams> {
        GandKParams::new(theta, self.c)
    }

    /// Synthetic dataset drawn under `theta` from the `DATASET` substream.
    pub fn dataset(&self, theta: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
        let p = self.params(theta)?;
        let mut r = rng::substream(seed, rng::purpose::DATASET, 0);
        Ok(p.sample(n, &mut r))
    }
}

/// Posterior over `(a, b, g, k)` under a uniform prior on a box.
#[derive(Debug)]
pub struct GandKPosterior {
    model: GandK,
    data: Vec<f64>,
    domain: Domain,
    counter: EvalCounter,
}

impl GandKPosterior {
    /// The default box `[0, 10]^4`.
    pub fn default_domain() -> Domain {
        Domain::cube(4, 0.0, 10.0).expect("static domain")
    }

    pub fn new(model: GandK, data: Vec<f64>, domain: Domain) -> Result<Self> {
        if domain.dim() != 4 {
            return Err(Error::DimensionMismatch {
                expected: 4,
                got: domain.dim(),
            });
        }
        Ok(Self {
            model,
            data,
            domain,
            counter: EvalCounter::default(),
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn model(&self) -> &GandK {
        &self.model
    }

    /// Log-likelihood of the data at `theta`.
    pub fn log_likelihood(&self, theta: &[f64]) -> Result<f64> {
        let p = GandKParams::unchecked(theta, self.model.c)?;
        if !(p.b > 0.0) {
            return Err(Error::InvalidParameter(
                "g-and-k scale must be positive".into(),
            ));
        }
        let mut total = 0.0;
        for &x in &self.data {
            total += p.log_density(x)?;
        }
        Ok(total)
    }
}

impl TargetDensity for GandKPosterior {
    fn name(&self) -> &str {
        "gandk"
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn counter(&self) -> &EvalCounter {
        &self.counter
    }

    fn log_q_uncounted(&self, theta: &[f64], _key: u64) -> Result<f64> {
        check_domain(&self.domain, theta)?;
        match self.log_likelihood(theta) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) | Err(_) => {
                log::warn!("g-and-k likelihood failed at {theta:?}; using sentinel");
                Ok(FAILED_LOG_Q)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THETA0: [f64; 4] = [3.0, 1.0, 2.0, 0.5];

    fn p(theta: [f64; 4]) -> GandKParams {
        GandKParams::new(&theta, DEFAULT_C).unwrap()
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(p([0.0, 1.0, 0.0, 0.0]).quantile(0.5).unwrap(), 0.0);
        assert!(
            (p([3.0, 1.0, 0.0, 0.0]).quantile(0.975).unwrap() - 4.959_963_984_540_054).abs() < 1e-8
        );
        assert!((p(THETA0).quantile(0.5).unwrap() - 3.0).abs() < 1e-9);
        assert!(p(THETA0).quantile(0.0).is_err());
        assert!(p(THETA0).quantile(1.0).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let g = p([0.0, 1.0, 0.0, 0.0]);
        assert!(
            (g.quantile_deriv(0.5).unwrap() - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12
        );
        let g = p(THETA0);
        let h = 1e-6;
        let fd = (g.quantile(0.3 + h).unwrap() - g.quantile(0.3 - h).unwrap()) / (2.0 * h);
        let d = g.quantile_deriv(0.3).unwrap();
        assert!(((d - fd) / d).abs() < 1e-5);
    }

    #[test]
    fn inverse_roundtrip_and_saturation() {
        let g = p(THETA0);
        let (u, clamped) = g.inverse_quantile(g.quantile(0.3).unwrap()).unwrap();
        assert!((u - 0.3).abs() < 1e-8 && !clamped);
        let (u, _) = p([0.0, 1.0, 0.0, 0.0]).inverse_quantile(0.0).unwrap();
        assert!((u - 0.5).abs() < 1e-12);
        let far = g.quantile_z(12.0);
        let (u, clamped) = g.inverse_quantile(far).unwrap();
        assert!(clamped && u == 1.0 - U_EPS);
        let (u, clamped) = g.inverse_quantile(-1e6).unwrap();
        assert!(clamped && u == U_EPS);
    }

    #[test]
    fn standard_normal_density() {
        let g = p([0.0, 1.0, 0.0, 0.0]);
        assert!((g.log_density(0.0).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_scale() {
        assert!(GandKParams::new(&[0.0, 0.0, 0.0, 0.0], DEFAULT_C).is_err());
    }

    #[test]
    fn posterior_counts_once_per_call() {
        let t = GandKPosterior::new(
            GandK::default(),
            vec![1.0, 2.0, 3.0],
            GandKPosterior::default_domain(),
        )
        .unwrap();
        t.log_q(&THETA0).unwrap();
        assert_eq!(t.eval_count(), 1);
        let empty = GandKPosterior::new(GandK::default(), vec![], GandKPosterior::default_domain())
            .unwrap();
        assert_eq!(empty.log_q(&THETA0).unwrap(), 0.0);
        let one = GandKPosterior::new(
            GandK::default(),
            vec![4.0],
            GandKPosterior::default_domain(),
        )
        .unwrap();
        assert!(
            (one.log_q(&[4.0, 1.0, 0.0, 0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-10
        );
    }
}
