use bis_core::gp::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn inputs_strategy(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), 1..=max_n)
}

/// Drops inputs closer than `min_gap` to an earlier one so exact
/// interpolation stays well conditioned.
fn spread(mut xs: Vec<Vec<f64>>, min_gap: f64) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for x in xs.drain(..) {
        if kept.iter().all(|k| {
            k.iter()
                .zip(&x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
                > min_gap
        }) {
            kept.push(x);
        }
    }
    kept
}

fn zero_prior(l: f64, s2: f64) -> GpPrior {
    GpPrior {
        mean: MeanSpec::Zero,
        kernel: KernelSpec::new(l, s2).unwrap(),
    }
}

struct Dense {
    mean: Vec<f64>,
    var: Vec<f64>,
    lml: f64,
}

/// Textbook GP regression with an explicit inverse.
fn dense_oracle(
    kernel: &KernelSpec,
    diag: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    queries: &[Vec<f64>],
) -> Dense {
    let n = xs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        kernel.eval(&xs[i], &xs[j]) + if i == j { diag } else { 0.0 }
    });
    let kinv = k.clone().try_inverse().unwrap();
    let y = DVector::from_vec(ys.to_vec());
    let alpha = &kinv * &y;
    let mut mean = Vec::new();
    let mut var = Vec::new();
    for q in queries {
        let kq = DVector::from_fn(n, |i, _| kernel.eval(&xs[i], q));
        mean.push(kq.dot(&alpha));
        var.push(kernel.variance - (kq.transpose() * &kinv * &kq)[(0, 0)]);
    }
    let lml = -0.5 * y.dot(&alpha)
        - 0.5 * k.determinant().ln()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Dense { mean, var, lml }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolates_training_outputs(xs in inputs_strategy(12, 2), l in 0.2f64..0.8, s2 in 0.5f64..20.0, seed in 0u64..1000) {
        let xs = spread(xs, 0.5);
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| ((i as u64 + seed) as f64 * 0.37).sin() * 3.0 + x[0]).collect();
        let t = TrainingSet::new(xs.clone(), ys.clone(), 0.0).unwrap();
        let post = GpPosterior::fit(&zero_prior(l, s2), &t).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((post.predict_mean(x) - y).abs() <= 1e-6 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn variance_is_bounded_by_prior(xs in inputs_strategy(10, 2), q in prop::collection::vec(-5.0f64..5.0, 2), l in 0.2f64..3.0, s2 in 0.1f64..50.0, noise in 0.0f64..0.1) {
        let ys = vec![1.0; xs.len()];
        let t = TrainingSet::new(xs, ys, noise).unwrap();
        let post = GpPosterior::fit(&zero_prior(l, s2), &t).unwrap();
        let v = post.predict_var(&q);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= s2 + 1e-8);
    }

    #[test]
    fn matches_dense_inverse_for_small_n(xs in inputs_strategy(8, 2), ys in prop::collection::vec(-4.0f64..4.0, 8), l in 0.3f64..2.0, s2 in 0.5f64..5.0, noise in 1e-3f64..0.5) {
        let n = xs.len();
        let ys = ys[..n].to_vec();
        let t = TrainingSet::new(xs.clone(), ys.clone(), noise).unwrap();
        let post = GpPosterior::fit(&zero_prior(l, s2), &t).unwrap();
        let diag = noise + post.factor().jitter();
        let queries = vec![vec![0.0, 0.0], vec![1.3, -0.7], xs[0].clone()];
        let d = dense_oracle(post.kernel(), diag, &xs, &ys, &queries);
        for (i, q) in queries.iter().enumerate() {
            prop_assert!(rel(post.predict_mean(q), d.mean[i]) < 1e-8, "mean {} vs {}", post.predict_mean(q), d.mean[i]);
            prop_assert!(rel(post.predict_var_raw(q), d.var[i]) < 1e-8, "var {} vs {}", post.predict_var_raw(q), d.var[i]);
        }
        prop_assert!(rel(post.log_marginal_likelihood(), d.lml) < 1e-8);
    }

    #[test]
    fn constant_shift_moves_mean_only(xs in inputs_strategy(10, 2), c in -50.0f64..50.0, q in prop::collection::vec(-4.0f64..4.0, 2)) {
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[1] - x[1].powi(2)).collect();
        let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
        let prior = zero_prior(1.0, 4.0);
        let fit = |values: &[f64]| {
            let (offset, centered) = center_outputs(values);
            let post = GpPosterior::fit(&prior, &TrainingSet::new(xs.clone(), centered, 1e-4).unwrap()).unwrap();
            (offset, post)
        };
        let (oa, a) = fit(&ys);
        let (ob, b) = fit(&shifted);
        let diff = (ob + b.predict_mean(&q)) - (oa + a.predict_mean(&q));
        prop_assert!((diff - c).abs() < 1e-10 * (1.0 + c.abs()), "{diff} vs {c}");
        prop_assert!((a.predict_var(&q) - b.predict_var(&q)).abs() < 1e-10);
    }
}

#[test]
fn recovers_lengthscale_of_sampled_gp() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    let true_l = 1.0;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 0.35]).collect();
    let k = KernelSpec::new(true_l, 1.0).unwrap();
    let n = xs.len();
    let cov = DMatrix::from_fn(n, n, |i, j| {
        k.eval(&xs[i], &xs[j]) + if i == j { 1e-8 } else { 0.0 }
    });
    let chol = cov.cholesky().unwrap();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let ys: Vec<f64> = (chol.l() * z).iter().copied().collect();
    let t = TrainingSet::new(xs, ys, 1e-6).unwrap();

    // Coarse grid oracle over log l with the variance profiled by a fine
    // inner grid.
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=60 {
        let ll = -3.0 + i as f64 * 0.1;
        for j in 0..=40 {
            let lv = -4.0 + j as f64 * 0.2;
            let v = log_marginal_likelihood(&zero_prior(ll.exp(), lv.exp()), &t).unwrap();
            if v > best.0 {
                best = (v, ll);
            }
        }
    }
    assert!(
        (best.1 - true_l.ln()).abs() <= 0.7,
        "grid optimum {}",
        best.1
    );

    let domain = bis_core::lowdisc::Domain::cube(1, 0.0, 10.15).unwrap();
    let (h, _) = mle_fit(&t, MeanForm::Zero, &MleConfig::for_domain(&domain), 3, None).unwrap();
    assert!((h.log_lengthscale - true_l.ln()).abs() <= 0.7, "{h:?}");
    assert!(
        (h.log_lengthscale - best.1).abs() <= 0.15,
        "{h:?} vs grid {}",
        best.1
    );
}

#[test]
fn two_point_example_matches_explicit_solve() {
    let t = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0], 0.0).unwrap();
    let post = GpPosterior::fit(&zero_prior(1.0, 1.0), &t).unwrap();
    let k01 = (-0.5f64).exp();
    let ka = (-0.125f64).exp();
    // [1 k01; k01 1]^{-1} [0; 1] = [-k01; 1] / (1 - k01^2)
    let expected = (ka * -k01 + ka) / (1.0 - k01 * k01);
    assert!((post.predict_mean(&[0.5]) - expected).abs() < 1e-7);
}

#[test]
fn single_zero_observation_evidence() {
    let t = TrainingSet::new(vec![vec![0.3]], vec![0.0], 0.0).unwrap();
    let v = log_marginal_likelihood(&zero_prior(1.0, 1.0), &t).unwrap();
    assert!((v + 0.918_938_533_204_672_7).abs() < 1e-7);
}
