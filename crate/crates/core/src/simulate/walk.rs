//! The cookie walk on a b-ary tree that is grown as it is explored.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{run_replicas, SimError, SimReport, StepLaw};
use crate::env::{stuck_probability_closed_form, CookieEnvironment, Mode};
use crate::simulate::stats::{anderson_darling, AndersonDarling};

const NONE: u32 = u32::MAX;

/// Default cap on allocated vertices.
pub const DEFAULT_ARENA_CAP: usize = 50_000_000;

/// Default step budget per replica in [`stuck_probability`].
pub const DEFAULT_STUCK_STEP_BUDGET: u64 = 10_000_000;

pub const DEFAULT_ABSORB_HEIGHT: u64 = 200;

/// Walk position plus the explored part of the tree. Vertex 0 is the root,
/// which is its own father.
#[derive(Debug, Clone)]
pub struct WalkState {
    b: u32,
    parent: Vec<u32>,
    /// `b` slots per vertex.
    children: Vec<u32>,
    visits: Vec<u64>,
    current: u32,
    steps: u64,
    height: u64,
    returns: u64,
    self_loops: u64,
    arena_cap: usize,
}

impl WalkState {
    pub fn new(b: u32, arena_cap: usize) -> Self {
        let mut state = WalkState {
            b,
            parent: Vec::new(),
            children: Vec::new(),
            visits: Vec::new(),
            current: 0,
            steps: 0,
            height: 0,
            returns: 0,
            self_loops: 0,
            arena_cap,
        };
        state.alloc(0);
        state.visits[0] = 1;
        state
    }

    fn alloc(&mut self, parent: u32) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(parent);
        self.children.extend(std::iter::repeat_n(NONE, self.b as usize));
        self.visits.push(0);
        id
    }

    pub fn current(&self) -> u32 {
        self.current
    }

    pub fn at_root(&self) -> bool {
        self.current == 0
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Arrivals at the root from one of its children.
    pub fn returns(&self) -> u64 {
        self.returns
    }

    pub fn self_loops(&self) -> u64 {
        self.self_loops
    }

    pub fn visits(&self, vertex: u32) -> u64 {
        self.visits[vertex as usize]
    }

    pub fn parent(&self, vertex: u32) -> u32 {
        self.parent[vertex as usize]
    }

    /// Child in slot `k`, `1 <= k <= b`, if already allocated.
    pub fn child(&self, vertex: u32, k: u32) -> Option<u32> {
        let id = self.children[vertex as usize * self.b as usize + (k - 1) as usize];
        (id != NONE).then_some(id)
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    /// One step; returns the `xi` value used (0 for the father, `k` for child `k`).
    pub fn step<R: Rng + ?Sized>(&mut self, table: &StepLaw, rng: &mut R) -> Result<u32, SimError> {
        let here = self.current as usize;
        let xi = table.draw(self.visits[here], rng);
        if xi == 0 {
            if here == 0 {
                self.self_loops += 1;
            } else {
                self.current = self.parent[here];
                self.height -= 1;
                if self.current == 0 {
                    self.returns += 1;
                }
            }
        } else {
            let slot = here * self.b as usize + (xi - 1) as usize;
            let mut next = self.children[slot];
            if next == NONE {
                if self.parent.len() >= self.arena_cap {
                    return Err(SimError::ArenaLimit { cap: self.arena_cap });
                }
                next = self.alloc(here as u32);
                self.children[slot] = next;
            }
            self.current = next;
            self.height += 1;
        }
        self.visits[self.current as usize] += 1;
        self.steps += 1;
        Ok(xi)
    }
}

/// Single step with a freshly built step law; for loops use [`WalkState::step`].
pub fn walk_step<R: Rng + ?Sized>(
    state: &mut WalkState,
    env: &CookieEnvironment,
    rng: &mut R,
) -> Result<u32, SimError> {
    state.step(&StepLaw::new(env), rng)
}

/// Speed and fluctuation estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedReport {
    /// Mean of `|X_n| / n` over replicas.
    pub speed: SimReport,
    /// Spread of `(|X_n| - v n) / sqrt(n)` across replicas.
    pub sigma: SimReport,
    /// Final height of each replica.
    pub heights: Vec<u64>,
    pub normality: Option<AndersonDarling>,
}

pub fn speed_estimate(
    env: &CookieEnvironment,
    steps: u64,
    replicas: usize,
    seed: u64,
) -> Result<SpeedReport, SimError> {
    speed_estimate_capped(env, steps, replicas, seed, DEFAULT_ARENA_CAP)
}

pub fn speed_estimate_capped(
    env: &CookieEnvironment,
    steps: u64,
    replicas: usize,
    seed: u64,
    arena_cap: usize,
) -> Result<SpeedReport, SimError> {
    if steps == 0 || replicas < 2 {
        return Err(SimError::InvalidArgument("speed needs steps >= 1 and replicas >= 2".into()));
    }
    let start = Instant::now();
    let table = StepLaw::new(env);
    let heights = run_replicas(replicas, seed, |rng, _| {
        let mut state = WalkState::new(env.b(), arena_cap);
        for _ in 0..steps {
            state.step(&table, rng)?;
        }
        Ok(state.height())
    })
    .into_iter()
    .collect::<Result<Vec<u64>, SimError>>()?;
    let wall = start.elapsed();

    let n = steps as f64;
    let speeds: Vec<f64> = heights.iter().map(|&h| h as f64 / n).collect();
    let speed = SimReport::from_samples(&speeds, steps, seed, wall);
    let z: Vec<f64> = heights
        .iter()
        .map(|&h| (h as f64 - speed.estimate * n) / n.sqrt())
        .collect();
    let r = replicas as f64;
    let sd = (z.iter().map(|v| v * v).sum::<f64>() / (r - 1.0)).sqrt();
    let sigma = SimReport::new(sd, sd / (2.0 * (r - 1.0)).sqrt(), replicas, steps, seed, wall);
    let normality = (replicas >= 8 && sd > 0.0).then(|| anderson_darling(&z));
    Ok(SpeedReport {
        speed,
        sigma,
        heights,
        normality,
    })
}

/// Stuck-at-root estimate in the zero-q extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StuckReport {
    pub report: SimReport,
    pub absorbed: usize,
    pub drifting: usize,
    pub undecided: usize,
    pub absorb_height: u64,
    /// Closed form for two cookies.
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StuckFate {
    Absorbed,
    Drifting,
    Undecided,
}

/// Fraction of walks that end up trapped at the root: at the root with more
/// than `M` visits, after which every step is a forced self-loop. A walk
/// reaching `absorb_height` counts as drifting.
///
/// Fails with [`SimError::UndecidedReplicas`] if more than 0.1% of the
/// replicas hit neither condition within `step_budget` steps.
pub fn stuck_probability(
    env: &CookieEnvironment,
    replicas: usize,
    seed: u64,
    absorb_height: u64,
    step_budget: u64,
) -> Result<StuckReport, SimError> {
    if env.mode() != Mode::ZeroQ {
        return Err(SimError::NotZeroQ);
    }
    if replicas == 0 || absorb_height == 0 {
        return Err(SimError::InvalidArgument("stuck needs replicas >= 1 and absorb_height >= 1".into()));
    }
    let start = Instant::now();
    let table = StepLaw::new(env);
    let m = env.m() as u64;
    let fates = run_replicas(replicas, seed, |rng, _| {
        let mut state = WalkState::new(env.b(), DEFAULT_ARENA_CAP);
        loop {
            if state.at_root() && state.visits(0) > m {
                return Ok(StuckFate::Absorbed);
            }
            if state.height() >= absorb_height {
                return Ok(StuckFate::Drifting);
            }
            if state.steps() >= step_budget {
                return Ok(StuckFate::Undecided);
            }
            state.step(&table, rng)?;
        }
    })
    .into_iter()
    .collect::<Result<Vec<StuckFate>, SimError>>()?;
    let count = |f: StuckFate| fates.iter().filter(|&&x| x == f).count();
    let (absorbed, drifting, undecided) = (
        count(StuckFate::Absorbed),
        count(StuckFate::Drifting),
        count(StuckFate::Undecided),
    );
    if undecided * 1000 > replicas {
        return Err(SimError::UndecidedReplicas { undecided, replicas });
    }
    let closed_form = match env.strengths() {
        &[p1, p2] => stuck_probability_closed_form(p1, p2, env.b()).ok(),
        _ => None,
    };
    Ok(StuckReport {
        report: SimReport::from_fraction(absorbed, replicas, step_budget, seed, start.elapsed()),
        absorbed,
        drifting,
        undecided,
        absorb_height,
        closed_form,
    })
}
