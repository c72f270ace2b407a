//! The chain `Z` of local times along a single ray: from `j`, the next value
//! is the number of 1s before the `j`-th failure of a fresh `xi` sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{replica_rng, run_replicas, StepLaw};
use crate::env::CookieEnvironment;

/// Number of draws equal to 1 before the `j`-th failure.
pub fn ones_before_failures<R: Rng + ?Sized>(law: &StepLaw, j: u64, rng: &mut R) -> u64 {
    let mut failures = 0;
    let mut ones = 0;
    let mut draw = 0;
    while failures < j {
        draw += 1;
        match law.draw(draw, rng) {
            0 => failures += 1,
            1 => ones += 1,
            _ => {}
        }
    }
    ones
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZRun {
    /// `Z_0, Z_1, ...` up to absorption or the step limit.
    pub path: Vec<u64>,
    /// First `n` with `Z_n = 0`; `None` if censored by the step limit.
    pub absorbed_at: Option<u64>,
    pub max: u64,
}

fn run_with<R: Rng + ?Sized>(law: &StepLaw, start: u64, steps: u64, rng: &mut R) -> ZRun {
    let mut path = vec![start];
    let mut z = start;
    let mut n = 0;
    while z > 0 && n < steps {
        z = ones_before_failures(law, z, rng);
        path.push(z);
        n += 1;
    }
    let max = path.iter().copied().max().unwrap_or(0);
    ZRun {
        absorbed_at: (z == 0).then_some(n),
        path,
        max,
    }
}

pub fn z_chain_run(env: &CookieEnvironment, start: u64, steps: u64, seed: u64) -> ZRun {
    run_with(&StepLaw::new(env), start, steps, &mut replica_rng(seed, 0))
}

/// Empirical moments `E[Z_n^a]` for `a` in {1, 2, 4} across replicas.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub fourth: Vec<f64>,
    /// Absorption time of each replica.
    pub absorbed_at: Vec<Option<u64>>,
    pub replicas: usize,
    pub seed: u64,
}

impl ZMoments {
    pub fn all_absorbed(&self) -> bool {
        self.absorbed_at.iter().all(Option::is_some)
    }
}

pub fn z_moments(env: &CookieEnvironment, start: u64, steps: u64, replicas: usize, seed: u64) -> ZMoments {
    let law = StepLaw::new(env);
    let runs = run_replicas(replicas, seed, |rng, _| run_with(&law, start, steps, rng));
    let len = steps as usize + 1;
    let mut sums = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for run in &runs {
        for (n, &z) in run.path.iter().enumerate() {
            let z = z as f64;
            sums[0][n] += z;
            sums[1][n] += z * z;
            sums[2][n] += z.powi(4);
        }
    }
    let r = replicas.max(1) as f64;
    let [first, second, fourth] = sums.map(|v| v.into_iter().map(|s| s / r).collect());
    ZMoments {
        first,
        second,
        fourth,
        absorbed_at: runs.iter().map(|r| r.absorbed_at).collect(),
        replicas,
        seed,
    }
}
