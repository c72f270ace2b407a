mod common;

use common::*;
use cookiewalk::classify::{
    monotonicity_probe, once_excited_boundary_b2, phase_boundary, verdict, Family, Outcome, DEFAULT_TOL,
};
use cookiewalk::env::{lambda_dig, lambda_sym, nu, pair_class_matrix};
use cookiewalk::pmatrix::PrefixEventTables;
use cookiewalk::spectral::{left_residual, pf_radius_finite, radius_infinite_class, PowerOptions};
use cookiewalk::{lambda_max, CookieEnvironment, CookieMatrix};
use ndarray::arr2;
use proptest::prelude::*;

fn strengths(max_m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..0.99], 1..=max_m)
}

fn env_strategy(max_m: usize) -> impl Strategy<Value = CookieEnvironment> {
    (prop::sample::select(vec![2u32, 3, 4]), strengths(max_m), 0.01f64..0.95)
        .prop_map(|(b, p, q)| CookieEnvironment::new(b, p, q).unwrap())
}

/// `p_i = 0` for `i <= M/2` and `q < b/(b+1)`.
fn sym_env_strategy(max_m: usize) -> impl Strategy<Value = CookieEnvironment> {
    (prop::sample::select(vec![2u32, 3]), 1..=max_m, prop::collection::vec(0.0f64..0.98, max_m), 0.05f64..0.9)
        .prop_map(|(b, m, raw, frac)| {
            let p = (1..=m).map(|i| if i <= m / 2 { 0.0 } else { raw[i - 1] }).collect();
            let q = frac * b as f64 / (b as f64 + 1.0);
            CookieEnvironment::new(b, p, q).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn lambda_sym_ignores_order(env in env_strategy(8), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut p = env.strengths().to_vec();
        p.shuffle(&mut seeded(seed));
        let shuffled = CookieEnvironment::new(env.b(), p, env.q()).unwrap();
        let (a, b) = (lambda_sym(&env).unwrap(), lambda_sym(&shuffled).unwrap());
        prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
    }

    #[test]
    fn digging_collapses(m in 1usize..10, b in 2u32..6, q in 0.01f64..0.95) {
        let env = CookieEnvironment::new(b, vec![0.0; m], q).unwrap();
        let (a, d) = (lambda_sym(&env).unwrap(), lambda_dig(m, q, b));
        prop_assert!((a - d).abs() <= 1e-13 * d.max(1.0));
    }

    #[test]
    fn nu_is_the_dominant_eigenvalue(p1 in 0.01f64..0.99, p2 in 0.01f64..0.99, b in prop::sample::select(vec![2u32, 3, 5])) {
        let a = arr2(&pair_class_matrix(p1, p2, b));
        let opts = PowerOptions { tol: 1e-15, max_iterations: 100_000 };
        let pf = pf_radius_finite(a.view(), opts).unwrap();
        prop_assert!((pf.radius - nu(p1, p2, b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lambda_sym_increases_to_one(env in sym_env_strategy(8), x in 0.01f64..0.98, y in 0.01f64..0.98) {
        prop_assume!((x - y).abs() > 1e-6);
        let crit = env.critical_q();
        let at = |q: f64| lambda_sym(&CookieEnvironment::new(env.b(), env.strengths().to_vec(), q).unwrap()).unwrap();
        let (lo, hi) = (x.min(y) * crit, x.max(y) * crit);
        prop_assert!(at(lo) < at(hi));
        prop_assert!((at(crit) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prefix_tables_partition(env in env_strategy(8)) {
        let t = PrefixEventTables::build(&env);
        let m = env.m();
        let mut total = 0.0;
        for zeros in 0..=m + 2 {
            for ones in 0..=m + 2 {
                let (e, ep) = (t.e(zeros, ones), t.e_prime(zeros, ones));
                prop_assert!((0.0..=1.0).contains(&e) && (0.0..=1.0).contains(&ep));
                if zeros + ones > m {
                    prop_assert!(e == 0.0 && ep == 0.0);
                }
                total += ep;
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rows_are_stochastic(env in env_strategy(6)) {
        let matrix = CookieMatrix::new(&env);
        prop_assert_eq!(matrix.entry(0, 0), 1.0);
        prop_assert!((1..40).all(|j| matrix.entry(0, j) == 0.0));
        // Geometric tail in j with ratio s: choose J with i-fold slack.
        let s = env.s();
        for i in 1..=30usize {
            let mut last = (i as f64 * 4.0 / (1.0 - s)) as usize + 40;
            while last < 5000 && s.powi(last as i32) * (last as f64).powi(i as i32) > 1e-13 {
                last += 50;
            }
            let sum = matrix.row_partial_sum(i, last);
            prop_assert!((1.0 - 1e-9..=1.0 + 1e-12).contains(&sum), "row {} sums to {}", i, sum);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_pattern_is_monotone(env in env_strategy(6)) {
        let matrix = CookieMatrix::new(&env);
        let n = 20;
        for i in 0..=n {
            for j in 0..=n {
                if matrix.entry(i, j) > 0.0 {
                    prop_assert!((0..=j).all(|k| matrix.entry(i, k) > 0.0), "row {} at {}", i, j);
                    prop_assert!((i..=n).all(|k| matrix.entry(k, j) > 0.0), "column {} at {}", j, i);
                }
            }
        }
    }

    #[test]
    fn growth_is_blocked(env in sym_env_strategy(9)) {
        let matrix = CookieMatrix::new(&env);
        let half = env.m() / 2;
        for i in 0..=half {
            for j in half + 1..=half + 20 {
                prop_assert_eq!(matrix.entry(i, j), 0.0);
            }
        }
    }

    #[test]
    fn uniform_rows_are_negative_binomial(b in 2u32..5, q in 0.01f64..0.95, m in 1usize..6) {
        let env = CookieEnvironment::new(b, vec![q; m], q).unwrap();
        let matrix = CookieMatrix::new(&env);
        let s = env.s();
        for i in 1..=20u64 {
            for j in 0..=20u64 {
                let want = neg_binomial(j, i, s);
                prop_assert!((matrix.entry(i as usize, j as usize) - want).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectrum_is_sane(env in env_strategy(5)) {
        let spectrum = lambda_max(&env, Default::default()).unwrap();
        prop_assert!(spectrum.lambda_max <= 1.0 + 1e-9 && spectrum.lambda_max >= 0.0);
        let top = spectrum.radii.iter().map(|r| r.radius).fold(0.0, f64::max);
        prop_assert_eq!(top, spectrum.lambda_max);
        for w in spectrum.trace.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-12, "trace decreased: {:?}", spectrum.trace);
        }
    }

    #[test]
    fn symmetric_case_radius(env in sym_env_strategy(7)) {
        let matrix = CookieMatrix::new(&env);
        let r = radius_infinite_class(&matrix, Default::default()).unwrap().unwrap();
        prop_assert!(r.converged);
        prop_assert!((r.radius - lambda_sym(&env).unwrap()).abs() < 1e-6, "{} vs {}", r.radius, lambda_sym(&env).unwrap());
    }

    #[test]
    fn left_test_vector(env in sym_env_strategy(6)) {
        // Needs a geometric test vector that decays fast enough to truncate.
        prop_assume!(env.c() < 0.8);
        let matrix = CookieMatrix::new(&env);
        let coarse = left_residual(&matrix, 40).unwrap();
        let fine = left_residual(&matrix, 200).unwrap();
        prop_assert!(fine < 1e-6, "residual {}", fine);
        prop_assert!(fine <= coarse + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn verdict_invariants(env in env_strategy(5)) {
        let v = verdict(&env, DEFAULT_TOL).unwrap();
        prop_assert_eq!(verdict(&env, DEFAULT_TOL).unwrap(), v);
        let threshold = 1.0 / env.b() as f64;
        if env.q() >= env.critical_q() {
            prop_assert!(v.shortcut && v.outcome == Outcome::Transient);
        }
        if v.shortcut {
            prop_assert_eq!(v.outcome, Outcome::Transient);
        }
        if v.outcome == Outcome::PositiveRecurrent {
            prop_assert!(v.lambda.unwrap() < threshold - DEFAULT_TOL && env.q() < env.critical_q());
        }
        if v.critical {
            prop_assert_eq!(v.outcome, Outcome::Recurrent);
        }
    }

    #[test]
    fn transience_moves_up(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let gen = EnvGen { max_m: 5, q_below_critical: Some(0.999), ..EnvGen::default() };
        let lo = random_env(&mut rng, gen);
        let hi = raise(&mut rng, &lo);
        let report = monotonicity_probe(&lo, &hi, DEFAULT_TOL).unwrap();
        prop_assert!(report.consistent, "{:?} {:?}", lo, hi);
    }
}

#[test]
fn once_excited_boundary_on_binary_tree() {
    for k in 1..=5 {
        let q = k as f64 / 10.0;
        let b = phase_boundary(&Family::once_excited_p(2, q), (0.0, 0.99), 1e-9, DEFAULT_TOL).unwrap();
        let want = once_excited_boundary_b2(q);
        assert!((b.param - want).abs() < 1e-6, "q = {q}: {} vs {want}", b.param);
    }
    assert!(once_excited_boundary_b2(2.0 - 2f64.sqrt()).abs() < 1e-12);
    assert!((once_excited_boundary_b2(0.5) - 0.5).abs() < 1e-12);
}

#[test]
fn digging_deep_enough_is_recurrent() {
    for b in [2u32, 3] {
        for k in 1..=9 {
            let q = k as f64 / 10.0 * b as f64 / (b as f64 + 1.0);
            let m = (1..).find(|&m| lambda_dig(m, q, b) <= 1.0 / b as f64).unwrap();
            let v = verdict(&CookieEnvironment::new(b, vec![0.0; m], q).unwrap(), DEFAULT_TOL).unwrap();
            assert!(!v.outcome.is_transient(), "b = {b}, q = {q}, M = {m}");
        }
    }
}

#[test]
fn above_critical_q_is_transient() {
    for b in [2u32, 3, 5] {
        let crit = b as f64 / (b as f64 + 1.0);
        for q in [crit, 0.5 * (crit + 1.0)] {
            let v = verdict(&CookieEnvironment::new(b, vec![0.0; 6], q).unwrap(), DEFAULT_TOL).unwrap();
            assert!(v.shortcut && v.outcome == Outcome::Transient);
        }
    }
}
