//! GP upper Jensen bound `U(theta) = E[phi(f(theta))]` with
//! `f(theta) ~ N(m, s2)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::special::{normal_cdf, normal_pdf};

/// Link between the GP output and the density: `q = phi(f)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSpec {
    #[default]
    Exp,
    Relu,
    Square,
}

impl PhiSpec {
    pub const ALL: [PhiSpec; 3] = [PhiSpec::Exp, PhiSpec::Relu, PhiSpec::Square];

    pub fn name(self) -> &'static str {
        match self {
            PhiSpec::Exp => "exp",
            PhiSpec::Relu => "relu",
            PhiSpec::Square => "square",
        }
    }

    /// `phi(x)`.
    pub fn apply(self, x: f64) -> f64 {
        match self {
            PhiSpec::Exp => x.exp(),
            PhiSpec::Relu => x.max(0.0),
            PhiSpec::Square => x * x,
        }
    }
}

impl std::str::FromStr for PhiSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exp" => Ok(PhiSpec::Exp),
            "relu" => Ok(PhiSpec::Relu),
            "square" => Ok(PhiSpec::Square),
            other => Err(format!("unknown phi '{other}'")),
        }
    }
}

/// Transformed output and whether it saturated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transformed {
    pub value: f64,
    pub saturated: bool,
}

/// `phi^{-1}(q)` given `log q`.
///
/// Relu and Square exponentiate; results that overflow are capped at
/// `f64::MAX` and flagged. Outputs are expected to be centered first.
pub fn transform_output(phi: PhiSpec, log_q: f64) -> Transformed {
    let value = match phi {
        PhiSpec::Exp => {
            return Transformed {
                value: log_q,
                saturated: false,
            }
        }
        PhiSpec::Relu => log_q.exp(),
        PhiSpec::Square => (0.5 * log_q).exp(),
    };
    if value.is_finite() {
        Transformed {
            value,
            saturated: false,
        }
    } else {
        Transformed {
            value: f64::MAX,
            saturated: true,
        }
    }
}

/// Closed-form GP-UJB.
pub fn ujb(m: f64, s2: f64, phi: PhiSpec) -> f64 {
    let s2 = s2.max(0.0);
    match phi {
        PhiSpec::Exp => (m + 0.5 * s2).exp(),
        PhiSpec::Square => m * m + s2,
        PhiSpec::Relu => {
            if s2 == 0.0 {
                return m.max(0.0);
            }
            let s = s2.sqrt();
            let z = m / s;
            (m * normal_cdf(z) + s * normal_pdf(z)).max(0.0)
        }
    }
}

/// `log ujb` for the exponential map; finite where `ujb` under- or overflows.
#[inline]
pub fn ujb_log(m: f64, s2: f64) -> f64 {
    m + 0.5 * s2.max(0.0)
}

/// Score used to rank candidates: `ujb_log` for Exp, `ujb` otherwise.
/// Monotone in `ujb` for every map.
#[inline]
pub fn ujb_score(m: f64, s2: f64, phi: PhiSpec) -> f64 {
    match phi {
        PhiSpec::Exp => ujb_log(m, s2),
        _ => ujb(m, s2, phi),
    }
}

/// Partial derivatives of `ujb_score` with respect to `m` and `s2`.
pub fn ujb_score_partials(m: f64, s2: f64, phi: PhiSpec) -> (f64, f64) {
    match phi {
        PhiSpec::Exp => (1.0, 0.5),
        PhiSpec::Square => (2.0 * m, 1.0),
        PhiSpec::Relu => {
            if s2 <= 0.0 {
                return (if m > 0.0 { 1.0 } else { 0.0 }, 0.0);
            }
            let s = s2.sqrt();
            let z = m / s;
            // dU/dm = Phi(z), dU/ds = pdf(z), ds/ds2 = 1 / (2 s)
            (normal_cdf(z), normal_pdf(z) / (2.0 * s))
        }
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Monte Carlo estimate of `E[phi(f)]`, for tests.
pub fn ujb_mc_oracle(m: f64, s2: f64, phi: PhiSpec, draws: usize, seed: u64) -> f64 {
    if s2 <= 0.0 {
        return phi.apply(m);
    }
    let s = s2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..draws {
        let z: f64 = StandardNormal.sample(&mut rng);
        sum += phi.apply(m + s * z);
    }
    sum / draws as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert!((ujb(0.0, 2.0, PhiSpec::Exp) - std::f64::consts::E).abs() < 1e-14);
        assert_eq!(ujb(3.0, 4.0, PhiSpec::Square), 13.0);
        assert!((ujb(0.0, 1.0, PhiSpec::Relu) - 0.398_942_280_401_432_7).abs() < 1e-14);
        assert_eq!(ujb(-2.0, 0.0, PhiSpec::Relu), 0.0);
        assert_eq!(ujb(2.0, 0.0, PhiSpec::Relu), 2.0);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(transform_output(PhiSpec::Exp, -3.2).value, -3.2);
        assert_eq!(transform_output(PhiSpec::Square, 0.0).value, 1.0);
        assert_eq!(
            transform_output(PhiSpec::Relu, f64::NEG_INFINITY).value,
            0.0
        );
        let t = transform_output(PhiSpec::Relu, 1e4);
        assert!(t.saturated && t.value.is_finite());
    }

    #[test]
    fn log_domain_stays_finite() {
        assert_eq!(ujb_log(-700.0, 1.0), -699.5);
        let scores = [ujb_log(0.0, 1.0), ujb_log(1.0, 0.1)];
        assert_eq!(argmax(&scores), Some(1));
        let (m, s2) = (0.3, 0.7);
        assert!((ujb_log(m, s2).exp() - ujb(m, s2, PhiSpec::Exp)).abs() < 1e-14);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn degenerate_oracle_is_exact() {
        for phi in PhiSpec::ALL {
            assert_eq!(ujb_mc_oracle(0.7, 0.0, phi, 10_000, 1), phi.apply(0.7));
        }
        let sq = ujb_mc_oracle(0.0, 1.0, PhiSpec::Square, 200_000, 9);
        assert!((sq - 1.0).abs() < 0.02);
    }

    #[test]
    fn partials_match_finite_differences() {
        for phi in PhiSpec::ALL {
            for &(m, s2) in &[(0.4, 0.9), (-1.2, 2.5), (2.0, 0.05)] {
                let (dm, ds) = ujb_score_partials(m, s2, phi);
                let h = 1e-6;
                let fdm = (ujb_score(m + h, s2, phi) - ujb_score(m - h, s2, phi)) / (2.0 * h);
                let fds = (ujb_score(m, s2 + h, phi) - ujb_score(m, s2 - h, phi)) / (2.0 * h);
                assert!((dm - fdm).abs() < 1e-6, "{phi:?} dm");
                assert!((ds - fds).abs() < 1e-6, "{phi:?} ds");
            }
        }
    }
}
