mod common;

use common::within_three_sigma;
use cookiewalk::env::stuck_probability_closed_form;
use cookiewalk::simulate::branching::l_process_runs;
use cookiewalk::simulate::walk::DEFAULT_STUCK_STEP_BUDGET;
use cookiewalk::simulate::*;
use cookiewalk::{CookieEnvironment, CookieMatrix};

fn env(b: u32, p: &[f64], q: f64) -> CookieEnvironment {
    CookieEnvironment::new(b, p.to_vec(), q).unwrap()
}

#[test]
fn child_law_matches_matrix_rows() {
    let draws = 1_000_000u64;
    for (k, e) in [env(2, &[0.5, 0.8, 0.0, 0.0], 0.3), env(3, &[0.0, 0.7, 0.2], 0.6)]
        .iter()
        .enumerate()
    {
        let matrix = CookieMatrix::new(e);
        let law = StepLaw::new(e);
        let mut checks = 0;
        let mut misses = 0;
        for j in 1..=6u64 {
            let mut rng = replica_rng(100 + k as u64, j);
            let mut counts = vec![0u64; e.b() as usize];
            let mut hist = vec![0u64; 40];
            for _ in 0..draws {
                offspring(&law, j, &mut rng, &mut counts);
                hist[(counts[0] as usize).min(39)] += 1;
            }
            for (n, &h) in hist.iter().enumerate().take(30) {
                checks += 1;
                if !within_three_sigma(h, draws, matrix.entry(j as usize, n)) {
                    misses += 1;
                }
            }
        }
        let allowed = allowed_exceedances(checks, 0.0027, 0.999);
        assert!(misses <= allowed, "{misses} of {checks} outside 3 sigma for {e:?}");
    }
}

#[test]
fn root_crossings_before_first_self_loop() {
    // First-visit row of the matrix, observed on the walk itself.
    let e = env(2, &[0.5, 0.3], 0.3);
    let matrix = CookieMatrix::new(&e);
    let law = StepLaw::new(&e);
    let replicas = 100_000usize;
    let counts = run_replicas(replicas, 11, |rng, _| {
        let mut state = WalkState::new(2, 10_000_000);
        let mut crossings = 0u64;
        while state.self_loops() == 0 {
            let from_root = state.at_root();
            let xi = state.step(&law, rng).unwrap();
            if from_root && xi == 1 {
                crossings += 1;
            }
        }
        crossings
    });
    for j in 0..8u64 {
        let hits = counts.iter().filter(|&&c| c == j).count() as u64;
        assert!(
            within_three_sigma(hits, replicas as u64, matrix.entry(1, j as usize)),
            "j = {j}: {hits} vs {}",
            matrix.entry(1, j as usize) * replicas as f64
        );
    }
}

#[test]
fn extinction_is_monotone() {
    let caps = LCaps {
        gen_cap: 2_000,
        pop_cap: 500,
        lambda_cap: None,
    };
    let envs = [
        env(2, &[0.6, 0.6, 0.0], 0.55),
        env(2, &[0.7, 0.6, 0.1], 0.6),
        env(2, &[0.9, 0.7, 0.3], 0.62),
    ];
    let mut by_env = Vec::new();
    for e in &envs {
        let mut previous: Option<SimReport> = None;
        for start in 1..=4 {
            let r = extinction_probability(e, start, 4_000, caps, 5).report;
            if let Some(p) = &previous {
                let slack = 2.0 * (p.stderr.powi(2) + r.stderr.powi(2)).sqrt();
                assert!(r.estimate <= p.estimate + slack, "start {start}: {} > {}", r.estimate, p.estimate);
            }
            previous = Some(r);
        }
        by_env.push(extinction_probability(e, 2, 4_000, caps, 6).report);
    }
    for w in by_env.windows(2) {
        let slack = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        assert!(w[1].estimate <= w[0].estimate + slack);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let e = env(2, &[0.5, 0.01], 0.95);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let speed = speed_estimate(&e, 20_000, 9, 3).unwrap();
            let caps = LCaps {
                pop_cap: 1_000,
                ..LCaps::default()
            };
            let ext = extinction_probability(&env(2, &[0.8, 0.5, 0.0, 0.0], 0.3), 5, 300, caps, 3);
            (
                speed.heights,
                speed.speed.estimate.to_bits(),
                speed.sigma.estimate.to_bits(),
                ext.died_out,
            )
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn heights_are_gaussian() {
    let e = env(2, &[0.5, 0.01], 0.95);
    let r = speed_estimate(&e, 1_000_000, 40, 42).unwrap();
    let ad = r.normality.unwrap();
    assert!(ad.passes, "{ad:?}");
}

#[test]
fn recurrent_walk_has_no_speed() {
    let r = speed_estimate(&env(2, &[0.3], 0.3), 1_000_000, 8, 1).unwrap();
    assert!(r.speed.estimate.abs() < 0.01, "{}", r.speed.estimate);
}

#[test]
fn strong_cookies_rarely_get_stuck() {
    let e = CookieEnvironment::zero_q(2, vec![0.99, 0.99]).unwrap();
    let r = stuck_probability(&e, 20_000, 4, 200, DEFAULT_STUCK_STEP_BUDGET).unwrap();
    let closed = r.closed_form.unwrap();
    assert!(closed < 0.05);
    assert!(r.report.within(closed, 3.0), "{} vs {closed}", r.report.estimate);
}

#[test]
fn stuck_equals_extinction_from_two() {
    let e = CookieEnvironment::zero_q(2, vec![0.8, 0.8]).unwrap();
    let caps = LCaps {
        gen_cap: 10_000,
        pop_cap: 1_000,
        lambda_cap: None,
    };
    let ext = extinction_probability(&e, 2, 40_000, caps, 8);
    let closed = stuck_probability_closed_form(0.8, 0.8, 2).unwrap();
    assert!((closed - 0.3794).abs() < 1e-4);
    assert!(ext.report.within(closed, 3.0), "{} vs {closed}", ext.report.estimate);
}

#[test]
fn critical_uniform_chain_dies_out() {
    let caps = LCaps {
        gen_cap: 10_000,
        pop_cap: 100_000,
        lambda_cap: None,
    };
    let ext = extinction_probability(&env(2, &[0.5], 0.5), 1, 2_000, caps, 2);
    assert!(ext.report.estimate >= 0.99, "{:?}", ext.report);
}

#[test]
fn transient_chain_survives() {
    let caps = LCaps {
        gen_cap: 10_000,
        pop_cap: 1_000,
        lambda_cap: None,
    };
    let runs = l_process_runs(&env(2, &[0.8, 0.5, 0.0, 0.0], 0.3), 5, 2_000, caps, 9);
    assert!(runs.iter().any(|r| !r.died_out));
}

#[test]
fn single_ray_chain_is_absorbed_with_bounded_moments() {
    let e = env(2, &[0.3], 0.3);
    let m = z_moments(&e, 5, 200, 20_000, 1);
    assert!(m.all_absorbed());
    let sup = m.second.iter().copied().fold(0.0, f64::max);
    assert_eq!(sup, m.second[0]);
    assert!(m.fourth.iter().all(|v| v.is_finite()));
    let late: f64 = m.second[100..].iter().sum();
    assert!(late < 1e-6);
    assert_eq!(z_chain_run(&e, 0, 10, 1).absorbed_at, Some(0));
}

#[test]
fn light_tail_is_not_a_power_law() {
    let e = env(2, &[0.6, 0.6, 0.0, 0.0], 0.5);
    let fit = lambda_tail_slope(&e, 1, 100_000, 3, 100_000).unwrap();
    assert!(fit.slope < -1.0 && !fit.power_law, "{fit:?}");
}
