//! Monte Carlo engines for the cookie walk, the edge local-time branching
//! chain `L` and the single-ray chain `Z`.
//!
//! Every replica draws from its own ChaCha8 stream selected by
//! `(seed, replica index)`, so a replica can be rerun in isolation. Replicas run
//! on the rayon pool and are aggregated in index order, which makes every
//! report independent of the thread count.

use std::time::Duration;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::CookieEnvironment;

pub mod branching;
pub mod stats;
pub mod walk;
pub mod zchain;

pub use branching::{
    extinction_probability, l_process_run, lambda_tail_slope, offspring, Censor, ExtinctionReport, LCaps, LRun,
    TailFit,
};
pub use stats::{allowed_exceedances, anderson_darling, AndersonDarling};
pub use walk::{speed_estimate, stuck_probability, walk_step, SpeedReport, StuckReport, WalkState};
pub use zchain::{ones_before_failures, z_chain_run, z_moments, ZMoments, ZRun};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("vertex arena exceeded its cap of {cap} vertices")]
    ArenaLimit { cap: usize },
    #[error("{undecided} of {replicas} replicas were neither absorbed nor drifting within the step budget")]
    UndecidedReplicas { undecided: usize, replicas: usize },
    #[error("only {exceeding} samples exceed the fit window's lower edge {lower}; need {needed}")]
    InsufficientTail { exceeding: usize, lower: f64, needed: usize },
    #[error("stuck probabilities need a zero-q environment")]
    NotZeroQ,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Summary of one Monte Carlo estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub estimate: f64,
    pub stderr: f64,
    /// `estimate -/+ 1.96 stderr`.
    pub ci95: (f64, f64),
    pub replicas: usize,
    /// Steps per replica, or generations for the branching chain.
    pub steps: u64,
    pub seed: u64,
    /// Not serialized so that artifacts are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl SimReport {
    pub fn new(estimate: f64, stderr: f64, replicas: usize, steps: u64, seed: u64, wall_clock: Duration) -> Self {
        SimReport {
            estimate,
            stderr,
            ci95: (estimate - 1.96 * stderr, estimate + 1.96 * stderr),
            replicas,
            steps,
            seed,
            wall_clock,
        }
    }

    /// Mean and standard error of `samples`.
    pub fn from_samples(samples: &[f64], steps: u64, seed: u64, wall_clock: Duration) -> Self {
        let (mean, stderr) = stats::mean_stderr(samples);
        SimReport::new(mean, stderr, samples.len(), steps, seed, wall_clock)
    }

    /// Frequency estimate with binomial standard error.
    pub fn from_fraction(hits: usize, replicas: usize, steps: u64, seed: u64, wall_clock: Duration) -> Self {
        let n = replicas.max(1) as f64;
        let p = hits as f64 / n;
        SimReport::new(p, (p * (1.0 - p) / n).sqrt(), replicas, steps, seed, wall_clock)
    }

    /// `|estimate - value| <= k * stderr`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.stderr
    }
}

/// The random stream of one replica.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Runs `f` for each replica index on the rayon pool; results are in index order.
pub fn run_replicas<T, F>(replicas: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_rng(seed, r as u64);
            f(&mut rng, r)
        })
        .collect()
}

/// Strength lookup with `q` past the last cookie, kept flat for the hot loops.
#[derive(Debug, Clone)]
pub struct StepLaw {
    strengths: Vec<f64>,
    q: f64,
    b: u32,
}

impl StepLaw {
    pub fn new(env: &CookieEnvironment) -> Self {
        StepLaw {
            strengths: env.strengths().to_vec(),
            q: env.q(),
            b: env.b(),
        }
    }

    /// Strength used at the `j`-th visit, `j >= 1`.
    #[inline]
    pub fn at(&self, j: u64) -> f64 {
        match self.strengths.get((j as usize).wrapping_sub(1)) {
            Some(&p) => p,
            None => self.q,
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, j: u64, rng: &mut R) -> u32 {
        draw_xi(rng, self.at(j), self.b)
    }
}

/// One draw of `xi`: 0 with probability `1 - p`, otherwise uniform on `1..=b`.
#[inline]
pub fn draw_xi<R: Rng + ?Sized>(rng: &mut R, p: f64, b: u32) -> u32 {
    let u: f64 = rng.random();
    let fail = 1.0 - p;
    if u < fail {
        0
    } else {
        ((((u - fail) / p) * b as f64) as u32 + 1).min(b)
    }
}
