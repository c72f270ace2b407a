//! The branching Markov chain `L` of edge local times.
//!
//! A particle at position `j` draws a fresh `xi` sequence up to its `j`-th
//! failure; child `k` is placed at the number of draws equal to `k`. Children
//! at position 0 are dropped since 0 is absorbing.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stats::linear_fit;
use super::{replica_rng, run_replicas, SimError, SimReport, StepLaw};
use crate::env::CookieEnvironment;

/// Caps for one run of `L`; hitting any of them censors the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LCaps {
    pub gen_cap: u64,
    pub pop_cap: u64,
    /// Stop once the accumulated `Lambda` reaches this value.
    pub lambda_cap: Option<u64>,
}

impl Default for LCaps {
    fn default() -> Self {
        LCaps {
            gen_cap: 10_000,
            pop_cap: 1_000_000,
            lambda_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Censor {
    Generations,
    Population,
    Lambda,
}

/// One run of `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LRun {
    pub died_out: bool,
    pub censored: Option<Censor>,
    /// Index of the first empty generation, or of the generation where the run stopped.
    pub generations: u64,
    /// Sum of positions over all particles ever alive; a lower bound when censored.
    pub lambda: u64,
    /// Number of particles ever alive.
    pub total_particles: u64,
    pub max_population: u64,
}

/// Draws the children of a particle at `position`; `counts[k - 1]` receives
/// the position of child `k`.
pub fn offspring<R: Rng + ?Sized>(law: &StepLaw, position: u64, rng: &mut R, counts: &mut [u64]) {
    counts.fill(0);
    let mut failures = 0;
    let mut draw = 0;
    while failures < position {
        draw += 1;
        match law.draw(draw, rng) {
            0 => failures += 1,
            k => counts[(k - 1) as usize] += 1,
        }
    }
}

fn run_with<R: Rng + ?Sized>(law: &StepLaw, b: u32, start: u64, caps: LCaps, rng: &mut R) -> LRun {
    let mut run = LRun {
        died_out: start == 0,
        censored: None,
        generations: 0,
        lambda: start,
        total_particles: u64::from(start > 0),
        max_population: u64::from(start > 0),
    };
    if start == 0 {
        return run;
    }
    let mut current = vec![start];
    let mut next = Vec::new();
    let mut counts = vec![0u64; b as usize];
    loop {
        if caps.lambda_cap.is_some_and(|cap| run.lambda >= cap) {
            run.censored = Some(Censor::Lambda);
            return run;
        }
        if run.generations >= caps.gen_cap {
            run.censored = Some(Censor::Generations);
            return run;
        }
        next.clear();
        for &position in &current {
            offspring(law, position, rng, &mut counts);
            next.extend(counts.iter().copied().filter(|&c| c > 0));
        }
        run.generations += 1;
        if next.is_empty() {
            run.died_out = true;
            return run;
        }
        let population = next.len() as u64;
        run.total_particles += population;
        run.lambda = run.lambda.saturating_add(next.iter().sum());
        run.max_population = run.max_population.max(population);
        if population > caps.pop_cap {
            run.censored = Some(Censor::Population);
            return run;
        }
        std::mem::swap(&mut current, &mut next);
    }
}

/// One run of `L` from a single particle at `start`, on replica stream 0 of `seed`.
pub fn l_process_run(env: &CookieEnvironment, start: u64, caps: LCaps, seed: u64) -> LRun {
    l_process_run_with(env, start, caps, &mut replica_rng(seed, 0))
}

pub fn l_process_run_with<R: Rng + ?Sized>(env: &CookieEnvironment, start: u64, caps: LCaps, rng: &mut R) -> LRun {
    run_with(&StepLaw::new(env), env.b(), start, caps, rng)
}

/// Runs of `L`, one per replica.
pub fn l_process_runs(env: &CookieEnvironment, start: u64, replicas: usize, caps: LCaps, seed: u64) -> Vec<LRun> {
    let law = StepLaw::new(env);
    run_replicas(replicas, seed, |rng, _| run_with(&law, env.b(), start, caps, rng))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtinctionReport {
    /// Fraction of replicas that died out; censored runs count as survival.
    pub report: SimReport,
    pub died_out: usize,
    pub censored: usize,
    pub start: u64,
    pub caps: LCaps,
}

pub fn extinction_probability(
    env: &CookieEnvironment,
    start: u64,
    replicas: usize,
    caps: LCaps,
    seed: u64,
) -> ExtinctionReport {
    let clock = Instant::now();
    let runs = l_process_runs(env, start, replicas, caps, seed);
    let died_out = runs.iter().filter(|r| r.died_out).count();
    let censored = runs.iter().filter(|r| r.censored.is_some()).count();
    ExtinctionReport {
        report: SimReport::from_fraction(died_out, replicas, caps.gen_cap, seed, clock.elapsed()),
        died_out,
        censored,
        start,
        caps,
    }
}

/// Log-log fit of the survival function of `Lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub stderr: f64,
    /// `[lower, upper]` of the fit window.
    pub window: (f64, f64),
    /// Slopes fitted on the lower and upper halves of the window.
    pub half_slopes: (f64, f64),
    /// Straight on the log-log scale and no steeper than `-1`.
    pub power_law: bool,
    pub exceeding: usize,
    pub replicas: usize,
    pub censored: usize,
    pub seed: u64,
}

/// Samples needed above the window's lower edge.
pub const MIN_TAIL_SAMPLES: usize = 100;

/// Default censoring level for `Lambda` in [`lambda_tail_slope`].
pub const DEFAULT_TAIL_CAP: u64 = 100_000;

const FIT_POINTS: usize = 21;

/// Fits `log P(Lambda > x)` against `log x` over the central two decades of
/// `[1, lambda_cap]`, i.e. `[sqrt(cap) / 10, 10 sqrt(cap)]`.
///
/// The standard error is the delta-method error of the slope between the two
/// window edges.
pub fn lambda_tail_slope(
    env: &CookieEnvironment,
    start: u64,
    replicas: usize,
    seed: u64,
    lambda_cap: u64,
) -> Result<TailFit, SimError> {
    if lambda_cap < 10_000 {
        return Err(SimError::InvalidArgument("lambda_cap must be at least 1e4".into()));
    }
    let caps = LCaps {
        gen_cap: u64::MAX,
        pop_cap: u64::MAX,
        lambda_cap: Some(lambda_cap),
    };
    let runs = l_process_runs(env, start, replicas, caps, seed);
    let censored = runs.iter().filter(|r| r.censored.is_some()).count();
    let mut lambdas: Vec<u64> = runs.iter().map(|r| r.lambda).collect();
    lambdas.sort_unstable();
    let n = lambdas.len() as f64;
    let survival = |x: f64| {
        let above = lambdas.len() - lambdas.partition_point(|&v| (v as f64) <= x);
        above as f64 / n
    };

    let centre = (lambda_cap as f64).log10() / 2.0;
    let (lower, upper) = (10f64.powf(centre - 1.0), 10f64.powf(centre + 1.0));
    let exceeding = lambdas.len() - lambdas.partition_point(|&v| (v as f64) <= lower);
    if exceeding < MIN_TAIL_SAMPLES {
        return Err(SimError::InsufficientTail {
            exceeding,
            lower,
            needed: MIN_TAIL_SAMPLES,
        });
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..FIT_POINTS {
        let x = lower * (upper / lower).powf(k as f64 / (FIT_POINTS - 1) as f64);
        let s = survival(x);
        if s > 0.0 {
            xs.push(x.ln());
            ys.push(s.ln());
        }
    }
    let (_, slope) = linear_fit(&xs, &ys);
    let half = FIT_POINTS / 2;
    let half_slope = |range: std::ops::Range<usize>| {
        let (x, y): (Vec<f64>, Vec<f64>) = range
            .filter(|&k| k < xs.len())
            .map(|k| (xs[k], ys[k]))
            .unzip();
        if x.len() < 2 {
            f64::NEG_INFINITY
        } else {
            linear_fit(&x, &y).1
        }
    };
    let half_slopes = (half_slope(0..half + 1), half_slope(half..FIT_POINTS));

    let s_lo = survival(lower);
    let s_hi = survival(upper);
    let var = |s: f64| if s > 0.0 { (1.0 - s) / (n * s) } else { f64::INFINITY };
    let stderr = (var(s_lo) + var(s_hi)).sqrt() / (upper / lower).ln();
    let power_law = xs.len() == FIT_POINTS
        && slope >= -1.0
        && (half_slopes.0 - half_slopes.1).abs() <= 0.25;
    Ok(TailFit {
        slope,
        stderr,
        window: (lower, upper),
        half_slopes,
        power_law,
        exceeding,
        replicas,
        censored,
        seed,
    })
}
