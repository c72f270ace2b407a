//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use cookiewalk::CookieEnvironment;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

/// `C(n, k)` by a running product; exact in f64 for the sizes used here.
pub fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// Number of successes before the `r`-th failure, success probability `s`.
pub fn neg_binomial(k: u64, r: u64, s: f64) -> f64 {
    if r == 0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    choose(k + r - 1, k) * s.powi(k as i32) * (1.0 - s).powi(r as i32)
}

/// `p(i, j)` for `i <= imax`, `j <= jmax` by enumerating the outcomes
/// {0, 1, other} of the first `M` draws and finishing with the
/// negative-binomial law of the i.i.d. tail.
pub fn enumeration_oracle(env: &CookieEnvironment, imax: usize, jmax: usize) -> Vec<Vec<f64>> {
    let m = env.m();
    let b = env.b() as f64;
    let q = env.q();
    let s = if q == 0.0 { 0.0 } else { (q / b) / (q / b + 1.0 - q) };
    let mut table = vec![vec![0.0; jmax + 1]; imax + 1];
    table[0][0] = 1.0;
    let total = 3usize.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        let mut weight = 1.0;
        let mut zeros = 0usize;
        let mut ones = 0usize;
        // Ones seen before each failure inside the prefix.
        let mut at_failure = Vec::new();
        for idx in 0..m {
            let p = env.strengths()[idx];
            match c % 3 {
                0 => {
                    weight *= 1.0 - p;
                    zeros += 1;
                    at_failure.push(ones);
                }
                1 => {
                    weight *= p / b;
                    ones += 1;
                }
                _ => weight *= p * (b - 1.0) / b,
            }
            c /= 3;
        }
        if weight == 0.0 {
            continue;
        }
        for (i, row) in table.iter_mut().enumerate().skip(1) {
            if i <= zeros {
                let j = at_failure[i - 1];
                if j <= jmax {
                    row[j] += weight;
                }
            } else {
                for (j, cell) in row.iter_mut().enumerate().skip(ones) {
                    *cell += weight * neg_binomial((j - ones) as u64, (i - zeros) as u64, s);
                }
            }
        }
    }
    table
}

/// Simulated ξ sequences: `counts[i][j]` is the number of trials with
/// exactly `j` ones before the `i`-th failure (`j = jmax + 1` collects the rest).
/// Past the cookies the draws are i.i.d., so the run of ones before each
/// failure there is drawn from the geometric law by table lookup.
pub fn monte_carlo_oracle(env: &CookieEnvironment, imax: usize, jmax: usize, trials: u64, seed: u64) -> Vec<Vec<u64>> {
    let mut rng = SmallRng::seed_from_u64(seed);
    let b = env.b() as f64;
    let strengths: Vec<f64> = env.strengths().to_vec();
    let q = env.q();
    let s = if q == 0.0 { 0.0 } else { (q / b) / (q / b + 1.0 - q) };
    let over = jmax + 1;
    // P(run <= k) for k = 0..=jmax.
    let cdf: Vec<f64> = (0..=jmax as i32).map(|k| 1.0 - s.powi(k + 1)).collect();
    let mut counts = vec![vec![0u64; jmax + 2]; imax + 1];
    for _ in 0..trials {
        let mut failures = 0;
        let mut ones = 0usize;
        for &p in &strengths {
            if failures == imax {
                break;
            }
            let u: f64 = rng.random();
            if u < 1.0 - p {
                failures += 1;
                counts[failures][ones.min(over)] += 1;
            } else if u < 1.0 - p + p / b {
                ones += 1;
            }
        }
        while failures < imax {
            if ones >= over {
                for row in &mut counts[failures + 1..=imax] {
                    row[over] += 1;
                }
                break;
            }
            let u: f64 = rng.random();
            ones += cdf.iter().position(|&c| u < c).unwrap_or(over);
            failures += 1;
            counts[failures][ones.min(over)] += 1;
        }
    }
    counts[0][0] = trials;
    counts
}

/// `|count - n p|` within three binomial standard deviations plus one count
/// of continuity slack.
pub fn within_three_sigma(count: u64, n: u64, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).max(0.0).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sd + 1.0
}

/// Irreducible classes of the positivity graph of `table` (a square
/// truncation `0..=n`): finite classes as intervals, plus the start of the
/// class containing the top state if it has one.
pub fn scc_oracle(table: &[Vec<f64>]) -> (Vec<(usize, usize)>, Option<usize>) {
    let n = table.len();
    let mut graph = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..n).map(|i| graph.add_node(i)).collect();
    for i in 0..n {
        for j in 0..n {
            if table[i][j] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut finite = Vec::new();
    let mut infinite = None;
    for comp in tarjan_scc(&graph) {
        let mut states: Vec<usize> = comp.iter().map(|&v| graph[v]).collect();
        states.sort_unstable();
        let (lo, hi) = (states[0], *states.last().unwrap());
        assert_eq!(hi - lo + 1, states.len(), "class {states:?} is not an interval");
        let closed_loop = states.len() > 1 || table[lo][lo] > 0.0;
        if !closed_loop || lo == 0 {
            continue;
        }
        if hi == n - 1 {
            infinite = Some(lo);
        } else {
            finite.push((lo, hi));
        }
    }
    finite.sort_unstable();
    (finite, infinite)
}

/// Options for [`random_env`].
#[derive(Debug, Clone, Copy)]
pub struct EnvGen {
    pub max_m: usize,
    pub zero_prob: f64,
    pub q_range: (f64, f64),
    /// Upper bound for q as a fraction of b/(b+1).
    pub q_below_critical: Option<f64>,
}

impl Default for EnvGen {
    fn default() -> Self {
        EnvGen {
            max_m: 8,
            zero_prob: 0.3,
            q_range: (0.05, 0.9),
            q_below_critical: None,
        }
    }
}

pub fn random_env<R: Rng>(rng: &mut R, gen: EnvGen) -> CookieEnvironment {
    let b = [2u32, 2, 3, 4][rng.random_range(0..4)];
    let m = rng.random_range(1..=gen.max_m);
    let strengths = (0..m)
        .map(|_| {
            if rng.random::<f64>() < gen.zero_prob {
                0.0
            } else {
                rng.random_range(0.02..0.98)
            }
        })
        .collect();
    let mut hi = gen.q_range.1;
    if let Some(f) = gen.q_below_critical {
        hi = hi.min(f * b as f64 / (b as f64 + 1.0));
    }
    let q = rng.random_range(gen.q_range.0..hi);
    CookieEnvironment::new(b, strengths, q).unwrap()
}

/// Environment with `p_i = 0` for `i <= M/2` and `q` a fraction of the way to b/(b+1).
pub fn random_sym_env<R: Rng>(rng: &mut R, max_m: usize) -> CookieEnvironment {
    let b = [2u32, 3][rng.random_range(0..2)];
    let m = rng.random_range(1..=max_m);
    let strengths = (1..=m)
        .map(|i| if i <= m / 2 { 0.0 } else { rng.random_range(0.0..0.98) })
        .collect();
    let q = rng.random_range(0.05..0.9) * b as f64 / (b as f64 + 1.0);
    CookieEnvironment::new(b, strengths, q).unwrap()
}

/// A componentwise larger copy of `env` with the same `b` and `M`, keeping
/// `q` below b/(b+1).
pub fn raise<R: Rng>(rng: &mut R, env: &CookieEnvironment) -> CookieEnvironment {
    let bump = |rng: &mut R, x: f64, top: f64| {
        if rng.random::<f64>() < 0.3 {
            x
        } else {
            x + rng.random::<f64>() * (top - x).max(0.0)
        }
    };
    let strengths = env.strengths().iter().map(|&p| bump(rng, p, 0.98)).collect();
    let crit = env.critical_q();
    let q = bump(rng, env.q(), 0.999 * crit);
    CookieEnvironment::new(env.b(), strengths, q).unwrap()
}

pub fn seeded(seed: u64) -> SmallRng {
    SmallRng::seed_from_u64(seed)
}
