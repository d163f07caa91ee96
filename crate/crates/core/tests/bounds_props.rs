use proptest::prelude::*;
use stablab::bounds::{evaluate_bound, BoundId, BoundInputs, ALL_BOUNDS};

/// Entries whose value grows with `n` at fixed `γ > 0` (the `√n` and `ln n` factors).
const GROWING_IN_N: [BoundId; 2] = [BoundId::HpE3, BoundId::HpFv19];

fn value(id: BoundId, gamma: f64, n: f64, delta: f64, eps: f64) -> f64 {
    evaluate_bound(id, &BoundInputs::new(gamma, n).delta(delta).eps(eps)).unwrap()
}

proptest! {
    #[test]
    fn nondecreasing_in_gamma(g in 0.0f64..2.0, dg in 0.0f64..1.0, n in 1.0f64..1e6, d in 0.001f64..0.999, e in 0.0f64..3.0) {
        for id in ALL_BOUNDS {
            let (a, b) = (value(id, g, n, d, e), value(id, g + dg, n, d, e));
            prop_assert!(a <= b * (1.0 + 1e-12), "{id}: {a} > {b}");
        }
    }

    #[test]
    fn nonincreasing_in_n(g in 0.0f64..2.0, n in 1.0f64..1e6, k in 1.0f64..100.0, d in 0.001f64..0.999, e in 0.0f64..3.0) {
        for id in ALL_BOUNDS.into_iter().filter(|b| !GROWING_IN_N.contains(b)) {
            let (a, b) = (value(id, g, n, d, e), value(id, g, n * k, d, e));
            prop_assert!(b <= a * (1.0 + 1e-12), "{id}: {b} > {a}");
        }
    }

    #[test]
    fn growing_entries_still_shrink_without_stability_term(n in 1.0f64..1e6, k in 1.0f64..100.0, d in 0.001f64..0.5) {
        for id in GROWING_IN_N {
            let (a, b) = (value(id, 0.0, n, d, 0.0), value(id, 0.0, n * k, d, 0.0));
            prop_assert!(b <= a * (1.0 + 1e-12), "{id}: {b} > {a}");
        }
    }

    #[test]
    fn values_are_nonnegative(g in 0.0f64..5.0, n in 1.0f64..1e8, d in 1e-9f64..0.999_999, e in 0.0f64..5.0) {
        for id in ALL_BOUNDS {
            prop_assert!(value(id, g, n, d, e) >= 0.0);
        }
    }

    #[test]
    fn rr_bounds_equal_generic_with_gamma_from_eps(e in 0.0f64..3.0, n in 1.0f64..1e6, d in 0.001f64..0.999, g in 0.0f64..1.0) {
        let gamma = e.exp() - 1.0;
        let generic = BoundInputs::new(gamma, n).delta(d);
        let thm5 = BoundInputs::new(g, n).delta(d).eps(e);
        let var = evaluate_bound(BoundId::VarE5, &generic).unwrap();
        let hp = evaluate_bound(BoundId::HpE6, &generic).unwrap();
        prop_assert!((evaluate_bound(BoundId::Thm5Var, &thm5).unwrap() - var).abs() <= 1e-12 * var.max(1.0));
        prop_assert!((evaluate_bound(BoundId::Thm5Hp, &thm5).unwrap() - hp).abs() <= 1e-12 * hp.max(1.0));
    }
}

#[test]
fn new_second_moment_wins_at_root_n_stability() {
    for n in 9..=100_000u32 {
        let n = f64::from(n);
        let i = BoundInputs::new(1.0 / n.sqrt(), n);
        let e5 = evaluate_bound(BoundId::VarE5, &i).unwrap();
        let e2 = evaluate_bound(BoundId::VarE2, &i).unwrap();
        assert!((e5 - 18.0 / n).abs() < 1e-12 * e5, "n={n}");
        assert!(e5 < e2, "n={n}: {e5} ≥ {e2}");
    }
}

#[test]
fn gamma_grid_monotone_for_every_entry() {
    let grid: Vec<f64> = (0..=200).map(|k| f64::from(k) * 0.01).collect();
    for id in ALL_BOUNDS {
        let vals: Vec<f64> = grid
            .iter()
            .map(|&g| value(id, g, 500.0, 0.05, 0.7))
            .collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{id}");
    }
}
