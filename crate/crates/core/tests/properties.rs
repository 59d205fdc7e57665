//! Randomized invariants.

mod common;

use common::{q_scan, sorted_weights, Norm};
use nterm_core::approx::{
    class_membership_norm, extremal_function_f1, greedy_order, greedy_remainder_sp, sp_norm, CoefficientSequence,
    FunctionClassSpec,
};
use nterm_core::functionals::{find_l_star, h_functional};
use nterm_core::lattice::{enumerate_ball, in_ball, shell_counts, Exponent, MultiIndex, DEFAULT_ENUMERATION_BUDGET};
use nterm_core::rates::{predicted_rate, RateParams, Theorem};
use nterm_core::sequence::Scaled;
use nterm_core::trig_lp::{evaluate_on_grid, hausdorff_young_gap, lp_norm, GridSpec};
use nterm_core::weights::{RearrangedWeight, WeightFunction};
use num_complex::Complex64;
use proptest::prelude::*;

fn coefficients(d: usize, max_len: usize, radius: i64) -> impl Strategy<Value = CoefficientSequence> {
    prop::collection::vec(
        (prop::collection::vec(-radius..=radius, d), -1.0f64..1.0, -1.0f64..1.0),
        1..=max_len,
    )
    .prop_map(move |entries| {
        let mut f = CoefficientSequence::new(d).unwrap();
        for (k, re, im) in entries {
            f.insert(MultiIndex(k), Complex64::new(re, im)).unwrap();
        }
        f
    })
}

fn weight() -> impl Strategy<Value = WeightFunction> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|s| WeightFunction::power(s).unwrap()),
        (0.5f64..3.0, -1.0f64..1.0).prop_map(|(s, e)| WeightFunction::power_log(s, e).unwrap()),
    ]
}

fn norm() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::Sup)]
}

fn exponent(n: Norm) -> Exponent {
    match n {
        Norm::L1 => Exponent::Finite(1.0),
        Norm::L2 => Exponent::Finite(2.0),
        Norm::Sup => Exponent::Infinity,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_order_is_nonincreasing(f in coefficients(2, 12, 4)) {
        let order = greedy_order(&f);
        prop_assert_eq!(order.len(), f.len());
        let mags: Vec<f64> = order.iter().map(|k| f.get(k).norm()).collect();
        prop_assert!(mags.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn sp_error_ignores_tie_order(len in 1usize..8, n in 0usize..8, p in 0.5f64..4.0) {
        // equal amplitudes with distinct phases: any n of them are optimal
        let f = CoefficientSequence::from_entries(
            1,
            (0..len).map(|i| (MultiIndex(vec![i as i64]), Complex64::from_polar(0.7, i as f64))),
        ).unwrap();
        let want = if n >= len { 0.0 } else { 0.7 * ((len - n) as f64).powf(1.0 / p) };
        prop_assert!((greedy_remainder_sp(&f, n, p).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn parseval(f in coefficients(2, 10, 5)) {
        let grid = GridSpec::new(2, 11).unwrap();
        let l2 = lp_norm(&f, 2.0, &grid).unwrap().value;
        let s2 = sp_norm(&f, 2.0).unwrap();
        prop_assert!((l2 - s2).abs() <= 1e-10 * s2);
    }

    #[test]
    fn refinement_stability(f in coefficients(1, 10, 8), half in 1u64..3) {
        let p = 2.0 * half as f64;
        let base = GridSpec::for_polynomial(&f, p).unwrap();
        let fine = GridSpec::new(1, 2 * base.points_per_dim).unwrap();
        let a = lp_norm(&f, p, &base).unwrap().value;
        let b = lp_norm(&f, p, &fine).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-6 * a);
    }

    #[test]
    fn samples_at_origin_sum_coefficients(f in coefficients(2, 10, 6)) {
        let s = evaluate_on_grid(&f, &GridSpec::new(2, 5).unwrap()).unwrap();
        let total: Complex64 = f.iter().map(|(_, a)| *a).sum();
        prop_assert!((s[0] - total).norm() < 1e-12);
    }

    #[test]
    fn hausdorff_young_holds(f in coefficients(1, 12, 10), p in 2.0f64..6.0) {
        let grid = GridSpec::new(1, 8 * 10 + 1).unwrap();
        prop_assert!(hausdorff_young_gap(&f, p, &grid).unwrap() >= -1e-9);
    }

    #[test]
    fn f1_is_in_its_class(q in 0.5f64..3.0, psi in weight(), n in 1u64..300, d in 1usize..3) {
        let f1 = extremal_function_f1(n, q, &psi, d, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let spec = FunctionClassSpec::new(q, Exponent::Finite(1.0), psi, d).unwrap();
        prop_assert!(class_membership_norm(&f1, &spec).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn scaling_is_linear(psi in weight(), c in 0.01f64..100.0, n in 0u64..50, s in prop_oneof![0.2f64..1.0, 1.2f64..4.0]) {
        let rw = RearrangedWeight::closed_form(psi, Exponent::Infinity, 1, 1.0).unwrap();
        let scaled = Scaled { inner: rw.clone(), factor: c };
        match (h_functional(&rw, n, s), h_functional(&scaled, n, s)) {
            (Ok(a), Ok(b)) => prop_assert!((b.value / (c * a.value) - 1.0).abs() < 1e-12, "{} {}", a.value, b.value),
            // divergent tails stay divergent under scaling
            (Err(a), Err(b)) => prop_assert_eq!(std::mem::discriminant(&a), std::mem::discriminant(&b)),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn q_threshold_consistency(psi in weight(), nrm in norm(), d in 1usize..3, n in 1usize..40, s in 1.1f64..4.0) {
        let rw = RearrangedWeight::closed_form(psi, exponent(nrm), d, 1.0).unwrap();
        let l_star = find_l_star(&rw, n as u64, s).unwrap() as usize;
        let values = sorted_weights(&psi, nrm, d, 60);
        let len = values.len().min(4000);
        prop_assume!(l_star + 2 < len);
        let ln: Vec<f64> = values[..len].iter().map(|v| v.ln()).collect();
        let q = q_scan(&ln, s, n);
        for (i, &qv) in q.iter().enumerate().take(len - n - 1) {
            let l = n + 1 + i;
            let next = (s * ln[l]).exp();
            // away from exact ties the sides of the threshold are strict
            if (qv / next - 1.0).abs() > 1e-9 {
                prop_assert_eq!(qv > next, l >= l_star, "l = {}", l);
            }
        }
    }

    #[test]
    fn enumeration_matches_counts(r in prop_oneof![Just(0.5f64), Just(1.0), Just(1.5), Just(2.0), Just(3.0)], d in 1usize..4, m in 1u64..6) {
        let r = Exponent::new(r).unwrap();
        let sd = shell_counts(r, d, m, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let pts = enumerate_ball(m, r, d, DEFAULT_ENUMERATION_BUDGET).unwrap();
        prop_assert_eq!(sd.cumulative(m).unwrap(), pts.len() as u64);
        // closed under sign flips and coordinate permutations
        for k in &pts {
            let mut flipped: Vec<i64> = k.coords().iter().map(|c| -c).collect();
            flipped.reverse();
            prop_assert!(in_ball(&MultiIndex(flipped), m, r));
        }
        let sup = shell_counts(Exponent::Infinity, d, m, DEFAULT_ENUMERATION_BUDGET).unwrap();
        prop_assert!(sd.cumulative(m).unwrap() <= sup.cumulative(m).unwrap());
        prop_assert_eq!(sup.cumulative(m).unwrap(), (2 * m + 1).pow(d as u32));
    }

    #[test]
    fn power_weights_give_power_law_rates(sexp in 0.5f64..4.0, q in 0.5f64..4.0, p in 1.0f64..6.0, d in 1usize..4, n in 1u64..1_000_000) {
        let params = RateParams {
            psi: WeightFunction::power(sexp).unwrap(),
            d,
            r: Exponent::Infinity,
            q: Some(q),
            p: Some(p),
            s: None,
        };
        let nf = n as f64;
        let le2 = predicted_rate(Theorem::Thm31PLe2, &params, n).unwrap().value;
        prop_assert!((le2 / nf.powf(-sexp / d as f64 - 1.0 / q + 0.5) - 1.0).abs() < 1e-12);
        let ge2 = predicted_rate(Theorem::Thm31PGe2, &params, n).unwrap().value;
        prop_assert!((ge2 / nf.powf(-sexp / d as f64 - 1.0 / q - 1.0 / p + 1.0) - 1.0).abs() < 1e-12);
    }
}
