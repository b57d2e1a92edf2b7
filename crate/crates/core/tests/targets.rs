use bis_core::lowdisc::Domain;
use bis_core::rng;
use bis_core::targets::lorenz::{gaussian_synthetic_log_likelihood, summaries, N_SUMMARIES};
use bis_core::targets::*;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THETA0: [f64; 4] = [3.0, 1.0, 2.0, 0.5];

proptest! {
    #[test]
    fn gandk_roundtrip(u in 1e-6f64..(1.0 - 1e-6), a in 0.0f64..10.0, b in 0.2f64..10.0, g in 0.0f64..10.0, k in 0.0f64..2.0) {
        if let Ok(p) = GandKParams::new(&[a, b, g, k], 0.8) {
            let x = p.quantile(u).unwrap();
            let (back, clamped) = p.inverse_quantile(x).unwrap();
            prop_assert!(!clamped);
            prop_assert!((back - u).abs() < 1e-8, "u={} back={}", u, back);
        }
    }
}

#[test]
fn gandk_roundtrip_grid_at_reference_parameter() {
    let p = GandKParams::new(&THETA0, 0.8).unwrap();
    for i in 1..1000 {
        let u = i as f64 / 1000.0;
        let x = p.quantile(u).unwrap();
        let (back, _) = p.inverse_quantile(x).unwrap();
        assert!((back - u).abs() < 1e-8, "u={u}: {back}");
    }
    let x = p.quantile(0.3).unwrap();
    assert!((p.inverse_quantile(x).unwrap().0 - 0.3).abs() < 1e-8);
}

#[test]
fn gandk_density_integrates_to_one() {
    let p = GandKParams::new(&THETA0, 0.8).unwrap();
    let lo = p.quantile(1e-6).unwrap();
    let hi = p.quantile(1.0 - 1e-6).unwrap();
    let n = 10_000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| p.log_density(x).unwrap().exp();
    let mut total = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        total += f(lo + i as f64 * h);
    }
    total *= h;
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn gandk_density_is_reciprocal_quantile_slope() {
    let p = GandKParams::new(&THETA0, 0.8).unwrap();
    let x = p.quantile(0.9).unwrap();
    let expect = 1.0 / p.quantile_deriv(0.9).unwrap();
    assert!((p.log_density(x).unwrap().exp() - expect).abs() < 1e-10 * expect);
}

#[test]
fn gandk_posterior_examples() {
    let empty =
        GandKPosterior::new(GandK::default(), vec![], GandKPosterior::default_domain()).unwrap();
    assert_eq!(empty.log_q(&THETA0).unwrap(), 0.0);
    let one = GandKPosterior::new(
        GandK::default(),
        vec![4.2],
        GandKPosterior::default_domain(),
    )
    .unwrap();
    let v = one.log_q(&[4.2, 1.0, 0.0, 0.0]).unwrap();
    assert!((v + 0.918_938_533_204_672_7).abs() < 1e-10);

    let data = GandK::default().dataset(&THETA0, 1000, 5).unwrap();
    let post =
        GandKPosterior::new(GandK::default(), data, GandKPosterior::default_domain()).unwrap();
    post.log_q(&THETA0).unwrap();
    post.log_q(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(post.eval_count(), 2);
    // The generating parameter beats a distant one.
    assert!(
        post.log_likelihood(&THETA0).unwrap() > post.log_likelihood(&[5.0, 3.0, 0.5, 1.5]).unwrap()
    );
}

fn refined(base: &LorenzConfig, factor: usize) -> LorenzConfig {
    LorenzConfig {
        dt: base.dt / factor as f64,
        steps_per_observation: base.steps_per_observation * factor,
        ..base.clone()
    }
}

fn max_deviation(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn rk4_converges_at_fourth_order() {
    let base = LorenzConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let x0: Vec<f64> = (0..40).map(|_| r.random_range(-1.0..1.0)).collect();
    let reference = refined(&base, 40).simulate(&[2.0, 0.1], &x0, None).unwrap();
    let err = |f: usize| {
        max_deviation(
            &refined(&base, f).simulate(&[2.0, 0.1], &x0, None).unwrap(),
            &reference,
        )
    };
    let (e1, e2, e4) = (err(1), err(2), err(4));
    assert!(e1 / e2 > 10.0 && e2 / e4 > 10.0, "{e1} {e2} {e4}");
    // One observation interval in, the default step is already accurate.
    let first = |f: usize| refined(&base, f).simulate(&[2.0, 0.1], &x0, None).unwrap()[0].clone();
    assert!(max_deviation(&[first(1)], &[first(10)]) < 1e-6);
}

/// Expanded-sum covariances on a variable-major copy of the path.
fn summaries_oracle(path: &[Vec<f64>]) -> [f64; N_SUMMARIES] {
    let t = path.len();
    let k = path[0].len();
    let series: Vec<Vec<f64>> = (0..k)
        .map(|j| path.iter().map(|row| row[j]).collect())
        .collect();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let lagged = |x: &[f64], y: &[f64], lag: usize| {
        let (mx, my) = (mean(x), mean(y));
        let mut sxy = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for i in 0..t - lag {
            sxy += x[i] * y[i + lag];
            sx += x[i];
            sy += y[i + lag];
        }
        (sxy - my * sx - mx * sy + (t - lag) as f64 * mx * my) / (t - 1) as f64
    };
    let mut out = [0.0; N_SUMMARIES];
    for j in 0..k {
        let x = &series[j];
        let next = &series[(j + 1) % k];
        let prev = &series[(j + k - 1) % k];
        out[0] += mean(x);
        out[1] += lagged(x, x, 0);
        out[2] += lagged(x, x, 1);
        out[3] += lagged(x, next, 0);
        out[4] += lagged(x, prev, 1);
        out[5] += lagged(x, next, 1);
    }
    out.map(|v| v / k as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summaries_match_expanded_sums(
        vals in prop::collection::vec(-3.0f64..3.0, 5 * 7),
        shift in -5.0f64..5.0,
    ) {
        let path: Vec<Vec<f64>> = vals.chunks(5).map(|c| c.iter().map(|v| v + shift).collect()).collect();
        let a = summaries(&path);
        let b = summaries_oracle(&path);
        for i in 0..N_SUMMARIES {
            prop_assert!((a[i] - b[i]).abs() < 1e-10, "stat {}: {} vs {}", i, a[i], b[i]);
        }
    }
}

#[test]
fn summaries_of_a_simulated_path_match_oracle() {
    let cfg = LorenzConfig::default();
    let x0: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
    let path = cfg
        .simulate(&[2.0, 0.1], &x0, Some(&mut rng::substream(9, 1, 1)))
        .unwrap();
    let (a, b) = (summaries(&path), summaries_oracle(&path));
    for i in 0..N_SUMMARIES {
        assert!((a[i] - b[i]).abs() < 1e-10 * (1.0 + b[i].abs()));
    }
}

#[test]
fn synthetic_likelihood_at_truth_is_plausible() {
    let cfg = LorenzConfig {
        replicates: 10_000,
        ..Default::default()
    };
    let post = LorenzPosterior::synthetic(cfg, &[2.0, 0.1], 21).unwrap();
    let sims = post.simulate_summaries(&[2.0, 0.1], 0).unwrap();
    let ll = gaussian_synthetic_log_likelihood(post.observed(), &sims).unwrap();
    assert!(ll.is_finite());

    // Dense oracle for the same Gaussian log-density.
    let r = sims.len() as f64;
    let m = DVector::from_fn(N_SUMMARIES, |i, _| {
        sims.iter().map(|s| s[i]).sum::<f64>() / r
    });
    let cov = DMatrix::from_fn(N_SUMMARIES, N_SUMMARIES, |i, j| {
        sims.iter()
            .map(|s| (s[i] - m[i]) * (s[j] - m[j]))
            .sum::<f64>()
            / (r - 1.0)
    });
    let resid = DVector::from_fn(N_SUMMARIES, |i, _| post.observed()[i]) - &m;
    let quad = (resid.transpose() * cov.clone().try_inverse().unwrap() * &resid)[(0, 0)];
    let expect =
        -0.5 * quad - 0.5 * ((2.0 * std::f64::consts::PI).powi(6) * cov.determinant()).ln();
    assert!(
        (ll - expect).abs() < 1e-8 * (1.0 + expect.abs()),
        "{ll} vs {expect}"
    );
    // The observed summaries are one draw from the model at the truth, so
    // the Mahalanobis term is on the chi-square(6) scale (99.9% point 22.46).
    assert!(quad < 22.46, "quadratic form {quad}");

    let again = post.simulate_summaries(&[2.0, 0.1], 0).unwrap();
    assert_eq!(sims, again);
}

#[test]
fn lorenz_counts_one_per_call() {
    let cfg = LorenzConfig {
        replicates: 20,
        ..Default::default()
    };
    let post = LorenzPosterior::synthetic(cfg, &[2.0, 0.1], 1).unwrap();
    post.log_q(&[2.0, 0.1]).unwrap();
    post.log_q(&[1.0, 0.3]).unwrap();
    assert_eq!(post.eval_count(), 2);
    assert!(post.log_q(&[6.0, 0.1]).is_err());
}

#[test]
fn benchmarks_match_matrix_form() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    for kind in BenchmarkKind::ALL {
        let d: Domain = kind.domain();
        let p = Matrix2::new(1.0, kind.rho(), kind.rho(), 1.0);
        for _ in 0..100 {
            let theta: Vec<f64> = (0..2)
                .map(|i| r.random_range(d.lower()[i]..d.upper()[i]))
                .collect();
            let t = match kind {
                BenchmarkKind::Gaussian => Vector2::new(theta[0], theta[1]),
                BenchmarkKind::Bimodal => Vector2::new(theta[0], theta[1] * theta[1] - 2.0),
                BenchmarkKind::Banana => {
                    Vector2::new(theta[0], theta[1] + theta[0] * theta[0] + 1.0)
                }
            };
            let expect = -0.5 * (t.transpose() * p * t)[(0, 0)];
            let got = kind.log_q(&theta);
            assert!(
                (got - expect).abs() <= 1e-12 * (1.0 + expect.abs()),
                "{kind:?} {theta:?}"
            );
        }
    }
}
