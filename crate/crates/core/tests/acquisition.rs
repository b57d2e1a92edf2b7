use bis_core::acquisition::*;
use proptest::prelude::*;

proptest! {
    #[test]
    fn jensen_lower_bound(m in -20.0f64..20.0, s2 in 0.0f64..30.0) {
        for phi in PhiSpec::ALL {
            let u = ujb(m, s2, phi);
            let lower = phi.apply(m);
            prop_assert!(u >= lower * (1.0 - 1e-12) - 1e-300, "{phi:?} {u} < {lower}");
        }
    }

    #[test]
    fn nondecreasing_in_variance(m in -10.0f64..10.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for phi in PhiSpec::ALL {
            prop_assert!(ujb(m, hi, phi) >= ujb(m, lo, phi) * (1.0 - 1e-12), "{phi:?}");
            prop_assert!(ujb_score(m, hi, phi) >= ujb_score(m, lo, phi) - 1e-12);
        }
    }

    #[test]
    fn exp_argmax_ignores_common_shift(
        pool in prop::collection::vec((-30.0f64..5.0, 0.0f64..8.0), 1..40),
        c in -200.0f64..200.0,
    ) {
        let base: Vec<f64> = pool.iter().map(|&(m, s2)| ujb_log(m, s2)).collect();
        let shifted: Vec<f64> = pool.iter().map(|&(m, s2)| ujb_log(m + c, s2)).collect();
        prop_assert_eq!(argmax(&base), argmax(&shifted));
        // On the linear scale the shift is a common factor e^c.
        for (&(m, s2), b) in pool.iter().zip(&base) {
            let ratio = ujb(m + c * 1e-2, s2, PhiSpec::Exp) / b.exp();
            prop_assert!((ratio.ln() - c * 1e-2).abs() < 1e-9);
        }
    }

    #[test]
    fn score_ranking_agrees_with_ujb(m1 in -5.0f64..5.0, v1 in 0.0f64..4.0, m2 in -5.0f64..5.0, v2 in 0.0f64..4.0) {
        for phi in PhiSpec::ALL {
            let by_ujb = ujb(m1, v1, phi) > ujb(m2, v2, phi);
            let by_score = ujb_score(m1, v1, phi) > ujb_score(m2, v2, phi);
            let close = (ujb(m1, v1, phi) - ujb(m2, v2, phi)).abs() < 1e-12 * ujb(m1, v1, phi).abs().max(1.0);
            prop_assert!(by_ujb == by_score || close);
        }
    }
}

#[test]
fn closed_forms_match_monte_carlo() {
    let mut seed = 0;
    for phi in PhiSpec::ALL {
        for m in [-1.0, 0.0, 1.5] {
            for s2 in [0.25, 1.0, 2.0] {
                seed += 1;
                let exact = ujb(m, s2, phi);
                let mc = ujb_mc_oracle(m, s2, phi, 1_000_000, seed);
                let err = (mc - exact).abs() / exact;
                assert!(err < 0.01, "{phi:?} m={m} s2={s2}: {mc} vs {exact}");
            }
        }
    }
}

#[test]
fn table_examples() {
    assert!((ujb(1.0, 0.0, PhiSpec::Exp) - std::f64::consts::E).abs() < 1e-15);
    assert_eq!(ujb(0.0, 1.0, PhiSpec::Square), 1.0);
    assert!((ujb_log(-800.0, 4.0) + 798.0).abs() < 1e-12);
    assert_eq!(argmax(&[1.0, 3.0, 3.0, f64::NAN]), Some(1));
    assert_eq!(argmax(&[]), None);
}
