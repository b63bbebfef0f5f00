mod common;

use std::cmp::Ordering;

use common::leap_strategy;
use num_complex::Complex64;
use proptest::prelude::*;
use randleap::absorbing::analyze;
use randleap::charpoly::{char_poly, located_reverse_roots, nonzero_roots, reverse_char_poly, spectral_roots};
use randleap::matrix::{accordion_product, det_complex};
use randleap::oracle::{build_transition_matrix, power_iteration_stationary, solve_absorption, Mode, POWER_TOL};
use randleap::params::LeapParams;
use randleap::stationary::{classify, reflect_step, stationary_two_sided, Verdict};

fn padded(params: &LeapParams, extra: usize) -> LeapParams {
    let mut p = params.raw_p().to_vec();
    let mut q = params.raw_q().to_vec();
    p.extend(std::iter::repeat_n(0.0, extra));
    q.extend(std::iter::repeat_n(0.0, extra));
    LeapParams::new(&p, &q, params.hold()).unwrap()
}

fn barrier(params: &LeapParams, extra: usize) -> usize {
    let prof = params.step_profile();
    prof.k_p + prof.k_q + extra
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trailing_zeros_change_nothing(params in leap_strategy(3), extra in 1usize..3, dn in 0usize..15) {
        let wide = padded(&params, extra);
        prop_assert_eq!(params.step_profile().r, wide.step_profile().r);
        let n = barrier(&params, dn);
        let a = analyze(&params, n, false).unwrap();
        let b = analyze(&wide, n, false).unwrap();
        let scale = a.v.iter().fold(1.0f64, |m, x| m.max(*x));
        for i in 0..=n {
            prop_assert!((a.u[i] - b.u[i]).abs() < 1e-10);
            prop_assert!((a.v[i] - b.v[i]).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn mirror_reverses_states(params in leap_strategy(3), dn in 0usize..15) {
        let n = barrier(&params, dn);
        let a = analyze(&params, n, false).unwrap();
        let b = analyze(&params.mirrored(), n, false).unwrap();
        let scale = a.v.iter().fold(1.0f64, |m, x| m.max(*x));
        for i in 0..=n {
            prop_assert!((a.u[i] + b.u[n - i] - 1.0).abs() < 1e-9);
            prop_assert!((a.v[i] - b.v[n - i]).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn absorption_is_monotone(params in leap_strategy(4), dn in 0usize..40) {
        let n = barrier(&params, dn);
        let res = analyze(&params, n, false).unwrap();
        prop_assert_eq!(res.u[0], 0.0);
        prop_assert_eq!(res.u[n], 1.0);
        prop_assert_eq!(res.v[0], 0.0);
        prop_assert_eq!(res.v[n], 0.0);
        for i in 0..n {
            prop_assert!(res.u[i + 1] >= res.u[i] - 1e-12, "u not monotone at {}: {:?}", i, res.u);
        }
        prop_assert!(res.v.iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn symmetric_leaps_are_balanced(w in proptest::collection::vec(0.01f64..1.0, 1..4), dn in 0usize..20) {
        let s: f64 = 2.0 * w.iter().sum::<f64>();
        let p: Vec<f64> = w.iter().map(|x| x / s).collect();
        let params = LeapParams::new(&p, &p, 0.0).unwrap();
        let n = barrier(&params, dn);
        let res = analyze(&params, n, false).unwrap();
        let scale = res.v.iter().fold(1.0f64, |m, x| m.max(*x));
        for i in 0..=n {
            prop_assert!((res.u[i] + res.u[n - i] - 1.0).abs() < 1e-10);
            prop_assert!((res.v[i] - res.v[n - i]).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn determinants_match_dense_solve(params in leap_strategy(4), dn in 0usize..30) {
        let n = barrier(&params, dn);
        let det = analyze(&params, n, false).unwrap();
        let (u, v) = solve_absorption(&build_transition_matrix(&params, n, Mode::Absorbing).unwrap()).unwrap();
        for i in 0..=n {
            prop_assert!((det.u[i] - u[i]).abs() < 1e-8);
            prop_assert!((det.v[i] - v[i]).abs() < 1e-7 * v[i].max(1.0));
        }
    }

    #[test]
    fn column_scaling_leaves_ratios(params in leap_strategy(3), dn in 0usize..20, seeds in proptest::collection::vec((0.1f64..10.0, -3.0f64..3.0), 8)) {
        let prof = params.step_profile();
        let n = barrier(&params, dn);
        let roots = spectral_roots(&params, false).unwrap();
        let den = accordion_product(n, &roots, n, &prof).unwrap().entries;
        let num = accordion_product(n / 2, &roots, n, &prof).unwrap().entries;
        let base = det_complex(&num) / det_complex(&den);
        let (mut den2, mut num2) = (den.clone(), num.clone());
        for col in 0..den.ncols() {
            let (r, th) = seeds[col % seeds.len()];
            let f = Complex64::from_polar(r, th);
            den2.column_mut(col).iter_mut().for_each(|x| *x *= f);
            num2.column_mut(col).iter_mut().for_each(|x| *x *= f);
        }
        let scaled = det_complex(&num2) / det_complex(&den2);
        prop_assert!((scaled - base).norm() <= 1e-10 * base.norm().max(1.0));
    }

    #[test]
    fn roots_certify_and_invert(params in leap_strategy(4)) {
        let prof = params.step_profile();
        let fwd = nonzero_roots(&char_poly(&params), &prof).unwrap();
        let rev = nonzero_roots(&reverse_char_poly(&params), &prof).unwrap();
        prop_assert_eq!(fwd.total, prof.r);
        prop_assert_eq!(rev.total, prof.r);
        let poly = char_poly(&params);
        let mu = params.drift().mu;
        prop_assert!((poly.eval(Complex64::new(1.0, 0.0)).re - mu).abs() < 1e-12);
        for r in &rev.roots {
            let back = r.value.inv();
            let v = poly.eval(back).norm() / back.norm().max(1.0).powi(poly.coeffs.len() as i32 - 1);
            prop_assert!(v < 1e-7, "{} gives {}", back, v);
        }
    }

    #[test]
    fn location_law(params in leap_strategy(4)) {
        let prof = params.step_profile();
        prop_assume!(prof.gcd_support == 1);
        let rep = located_reverse_roots(&params, false).unwrap();
        let s = params.drift_sign().sign;
        let want = (
            prof.k_p - usize::from(s != Ordering::Less),
            usize::from(s == Ordering::Equal),
            prof.k_q - usize::from(s != Ordering::Greater),
        );
        prop_assert_eq!((rep.inside, rep.on, rep.outside), want);
    }

    #[test]
    fn classification_mirrors(params in leap_strategy(4)) {
        let a = classify(&params).verdict;
        let b = classify(&params.mirrored()).verdict;
        let want = match a {
            Verdict::TransientLeft => Verdict::TransientRight,
            Verdict::TransientRight => Verdict::TransientLeft,
            Verdict::NullRecurrent => Verdict::NullRecurrent,
        };
        prop_assert_eq!(b, want);
    }

    #[test]
    fn two_sided_is_stationary(params in leap_strategy(3), dn in 0usize..25) {
        prop_assume!(params.step_profile().gcd_support == 1);
        let n = barrier(&params, dn);
        let res = stationary_two_sided(&params, n, false).unwrap();
        prop_assert!(res.residual <= 1e-10, "residual {}", res.residual);
        prop_assert!(res.pi.iter().all(|x| *x >= 0.0));
        prop_assert!((res.pi.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn transition_rows_are_stochastic(params in leap_strategy(4), dn in 0usize..20) {
        let n = barrier(&params, dn);
        for mode in [Mode::Absorbing, Mode::ReflectingTwoSided, Mode::ReflectingOneSidedTruncated] {
            let pm = build_transition_matrix(&params, n, mode).unwrap();
            prop_assert!(pm.max_row_sum_error() < 1e-14);
        }
    }

    #[test]
    fn first_step_equations_hold(params in leap_strategy(4), dn in 0usize..25) {
        let n = barrier(&params, dn);
        let pm = build_transition_matrix(&params, n, Mode::Absorbing).unwrap();
        let res = analyze(&params, n, false).unwrap();
        let scale = res.v.iter().fold(1.0f64, |m, x| m.max(*x));
        for i in 1..n {
            let row = pm.entries.row(i);
            let eu: f64 = (0..=n).map(|j| row[j] * res.u[j]).sum();
            let ev: f64 = 1.0 + (0..=n).map(|j| row[j] * res.v[j]).sum::<f64>();
            prop_assert!((eu - res.u[i]).abs() < 1e-9);
            prop_assert!((ev - res.v[i]).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn power_iteration_is_a_fixed_point(params in leap_strategy(3), dn in 0usize..20) {
        prop_assume!(params.step_profile().gcd_support == 1);
        let n = barrier(&params, dn);
        let pm = build_transition_matrix(&params, n, Mode::ReflectingTwoSided).unwrap();
        let pi = power_iteration_stationary(&pm, POWER_TOL).unwrap();
        let next = reflect_step(&params, &pi, Some(n));
        let gap = pi.iter().zip(&next).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(gap < 1e-11, "gap {}", gap);
        let det = stationary_two_sided(&params, n, false).unwrap();
        for j in 0..=n {
            prop_assert!((det.pi[j] - pi[j]).abs() < 1e-7);
        }
    }
}
