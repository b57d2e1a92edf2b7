use bis_core::lowdisc::*;
use proptest::prelude::*;

fn halton(n: usize, dim: usize) -> Vec<Vec<f64>> {
    HaltonStream::new(dim).take(n).collect()
}

#[test]
fn halton_discrepancy_envelope_1d() {
    let mut ratios = Vec::new();
    for k in 4..=12 {
        let n = 1usize << k;
        let pts: Vec<f64> = halton(n, 1).into_iter().map(|p| p[0]).collect();
        let d = star_discrepancy_1d(&pts).unwrap();
        ratios.push(d / ((n as f64).ln() / n as f64));
    }
    assert!(ratios.iter().all(|r| *r <= 1.0), "{ratios:?}");
}

#[test]
fn halton_discrepancy_envelope_2d() {
    // Grid value plus its resolution slack bounds the exact discrepancy.
    let res = 2048;
    let slack = 2.0 / res as f64;
    let mut ratios = Vec::new();
    for k in 4..=12 {
        let n = 1usize << k;
        let d = star_discrepancy_grid(&halton(n, 2), res).unwrap() + slack;
        ratios.push(d / ((n as f64).ln().powi(2) / n as f64));
    }
    assert!(ratios.iter().all(|r| *r <= 1.0), "{ratios:?}");
}

#[test]
fn first_points_in_base_two_and_three() {
    let p = halton(4, 2);
    assert_eq!(p[0], vec![0.5, 1.0 / 3.0]);
    assert_eq!(p[1], vec![0.25, 2.0 / 3.0]);
    assert_eq!(p[2], vec![0.75, 1.0 / 9.0]);
    assert_eq!(p[3], vec![0.125, 4.0 / 9.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_agrees_with_exact_in_1d(pts in prop::collection::vec(0.0f64..1.0, 1..=20)) {
        let res = 100_000;
        let exact = star_discrepancy_1d(&pts).unwrap();
        let grid = star_discrepancy_grid(&pts.iter().map(|x| vec![*x]).collect::<Vec<_>>(), res).unwrap();
        prop_assert!(grid <= exact + 1e-12);
        prop_assert!(exact - grid <= 1.0 / res as f64);
    }

    #[test]
    fn scaled_points_stay_inside(cursor in 1u64..100_000, lo in -10.0f64..0.0, w in 0.01f64..20.0) {
        let d = Domain::cube(3, lo, lo + w).unwrap();
        let mut s = ScaledStream::new(Box::new(HaltonStream::new(3).starting_at(cursor)), d.clone()).unwrap();
        for _ in 0..50 {
            let (_, p) = s.next_point();
            for i in 0..3 {
                prop_assert!(p[i] >= d.lower()[i] && p[i] < d.upper()[i]);
            }
        }
    }

    #[test]
    fn identical_cursors_give_identical_streams(cursor in 1u64..1_000_000, dim in 1usize..5) {
        let a: Vec<_> = HaltonStream::new(dim).starting_at(cursor).take(20).collect();
        let b: Vec<_> = HaltonStream::new(dim).starting_at(cursor).take(20).collect();
        prop_assert_eq!(a, b);
    }
}
