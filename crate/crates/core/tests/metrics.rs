use bis_core::gp::*;
use bis_core::lowdisc::Domain;
use bis_core::metrics::*;
use bis_core::sampler::WeightedSampleSet;
use bis_core::special::normal_cdf;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn weighted_set() -> impl Strategy<Value = WeightedSampleSet> {
    (1usize..25).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-1.5f64..1.5, 2), n),
            prop::collection::vec(-4.0f64..0.0, n),
        )
            .prop_map(|(p, l)| WeightedSampleSet::from_log_ratios(p, l).unwrap())
    })
}

/// Squared MMD by the double sum over all pairs.
fn two_loop(a: &WeightedSampleSet, b: &WeightedSampleSet, h: f64) -> f64 {
    let k = |x: &[f64], y: &[f64]| {
        let d2: f64 = x.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum();
        (-0.5 * d2 / h).exp()
    };
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..a.len() {
            s += a.weights[i] * a.weights[j] * k(&a.points[i], &a.points[j]);
        }
    }
    for i in 0..b.len() {
        for j in 0..b.len() {
            s += b.weights[i] * b.weights[j] * k(&b.points[i], &b.points[j]);
        }
    }
    for i in 0..a.len() {
        for j in 0..b.len() {
            s -= 2.0 * a.weights[i] * b.weights[j] * k(&a.points[i], &b.points[j]);
        }
    }
    s.max(0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmd_matches_two_loop_oracle(a in weighted_set(), b in weighted_set(), h in 0.05f64..2.0) {
        let kernel = MmdKernel::new(h).unwrap();
        let expect = two_loop(&a, &b, h);
        prop_assert!((mmd_squared(&a, &b, &kernel).unwrap() - expect).abs() < 1e-12);
        let r = MmdReference::new(&b, kernel).unwrap();
        prop_assert!((r.mmd_squared(&a).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn prefix_tracker_matches_batch(a in weighted_set(), b in weighted_set()) {
        let kernel = MmdKernel::default();
        let r = MmdReference::new(&b, kernel).unwrap();
        let ratios: Vec<f64> = a.weights.iter().map(|w| w.ln()).collect();
        let mut t = r.prefix_tracker();
        for n in 1..=a.len() {
            let got = t.push(a.points[n - 1].clone(), ratios[n - 1] * 3.0);
            let pre = WeightedSampleSet::from_log_ratios(a.points[..n].to_vec(), ratios[..n].iter().map(|l| l * 3.0).collect()).unwrap();
            let expect = two_loop(&pre, &b, kernel.bandwidth).sqrt();
            prop_assert!((got - expect).abs() < 1e-6, "n={} {} vs {}", n, got, expect);
        }
    }

    #[test]
    fn mmd_is_symmetric_and_zero_on_itself(a in weighted_set(), b in weighted_set()) {
        let k = MmdKernel::default();
        prop_assert!(mmd_squared(&a, &a, &k).unwrap() < 1e-12);
        prop_assert!((mmd(&a, &b, &k).unwrap() - mmd(&b, &a, &k).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn tvd_of_correlated_gaussians_matches_closed_form() {
    // Same precision, shifted means: TVD = 2 Phi(delta / 2) - 1 with delta
    // the Mahalanobis distance between the means.
    let rho: f64 = 0.5;
    let quad = |x: f64, y: f64| (x * x - 2.0 * rho * x * y + y * y) / (1.0 - rho * rho);
    let (dx, dy) = (0.8, -0.3);
    let delta = quad(dx, dy).sqrt();
    let d = Domain::cube(2, -9.0, 9.0).unwrap();
    let t = tvd_numeric(
        |p| -0.5 * quad(p[0], p[1]),
        |p| -0.5 * quad(p[0] - dx, p[1] - dy),
        &d,
        200_000,
    )
    .unwrap();
    let exact = 2.0 * normal_cdf(0.5 * delta) - 1.0;
    assert!((t - exact).abs() < 1e-3, "{t} vs {exact}");
}

fn quadratic_log_density(x: &[f64], c: f64) -> f64 {
    c - 0.5 * x[0] * x[0]
}

fn gap_for(c: f64, n_train: usize, l: f64) -> GapCheck {
    let xs: Vec<Vec<f64>> = (0..n_train)
        .map(|i| vec![-3.0 + 6.0 * i as f64 / (n_train - 1) as f64])
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| quadratic_log_density(x, c)).collect();
    let prior = GpPrior {
        mean: MeanSpec::Zero,
        kernel: KernelSpec::new(l, 4.0).unwrap(),
    };
    let post = GpPosterior::fit(&prior, &TrainingSet::new(xs, ys, 1e-8).unwrap()).unwrap();
    let d = Domain::cube(1, -3.0, 3.0).unwrap();
    ujb_l2_gap_check(&post, |x| quadratic_log_density(x, c), &d, 2000, 200, 3).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gap_bound_holds_under_its_precondition(c in -6.0f64..0.0, n_train in 2usize..20, l in 0.3f64..2.0) {
        let g = gap_for(c, n_train, l);
        prop_assert!(g.lhs.is_finite() && g.rhs.is_finite());
        if g.precondition {
            prop_assert!(g.lhs <= g.rhs, "{:?}", g);
        }
    }
}

#[test]
fn gap_check_with_dense_training_verifies_precondition() {
    let g = gap_for(-1.0, 25, 1.0);
    assert!(g.precondition);
    assert!(g.lhs <= g.rhs);
    assert!(g.rhs < 1e-3);
    let loose = gap_for(-1.0, 3, 0.5);
    assert!(
        (loose.rhs_monte_carlo - loose.rhs).abs() < 0.1 * loose.rhs,
        "{loose:?}"
    );
}

#[test]
fn kde_recovers_a_normal_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Vec<f64>> = (0..4000)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            vec![z]
        })
        .collect();
    let kde = Kde::silverman(&WeightedSampleSet::uniform(pts).unwrap()).unwrap();
    for x in [-1.0f64, 0.0, 0.7, 2.0] {
        let exact = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((kde.evaluate(&[x]) - exact).abs() < 0.03, "x={x}");
    }
    assert!(kde.mode_on_grid(-3.0, 3.0, 601).abs() < 0.2);
}
