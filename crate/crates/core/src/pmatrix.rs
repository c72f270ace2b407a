//! The cookie environment matrix `P = (p(i, j))`.
//!
//! `p(i, j)` is the probability that exactly `j` of the draws `xi_1, xi_2, ...`
//! equal 1 before the `i`-th failure. It is the offspring law of one child in
//! the edge-crossing branching chain and the transition matrix of the
//! tagged-particle chain.
//!
//! Entries are computed by splitting the draw sequence at index `M`: the
//! prefix `xi_1..xi_M` is summarized by [`PrefixEventTables`], and the i.i.d.
//! tail contributes a negative-binomial factor in `s = q / (q + (1 - q) b)`.

use std::collections::HashMap;
use std::sync::RwLock;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::env::CookieEnvironment;

/// Default cell budget for [`CookieMatrix::truncate`].
pub const DEFAULT_CELL_BUDGET: usize = 100_000_000;

/// Entries with `i + j` above this are evaluated in log space.
const LOG_SPACE_THRESHOLD: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("window [{lo}, {hi}] is empty")]
    IndexError { lo: usize, hi: usize },
    #[error("truncation needs {cells} cells, budget is {budget}")]
    AllocationLimit { cells: usize, budget: usize },
}

/// Probabilities of the prefix events over `(xi_1, ..., xi_M)`.
///
/// * `e(m, n)`: at least `m` failures, and exactly `n` ones before the `m`-th.
/// * `e_prime(m, n)`: exactly `m` failures and exactly `n` ones.
///
/// Both vanish when `m + n > M`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixEventTables {
    m: usize,
    e: Vec<f64>,
    e_prime: Vec<f64>,
}

impl PrefixEventTables {
    /// Dynamic program over the index `k = 1..=M` with state
    /// `(failures so far, ones so far)`. `O(M^3)`.
    pub fn build(env: &CookieEnvironment) -> Self {
        let m = env.m();
        let width = m + 1;
        let mut e = vec![0.0; width * width];
        // dist[z * width + o]: P{z failures and o ones among xi_1..xi_k}.
        let mut dist = vec![0.0; width * width];
        dist[0] = 1.0;
        for k in 1..=m {
            let law = env.xi_law(k);
            let other = 1.0 - law.fail_prob - law.one_prob;
            let mut next = vec![0.0; width * width];
            for zeros in 0..k {
                for ones in 0..k - zeros {
                    let mass = dist[zeros * width + ones];
                    if mass == 0.0 {
                        continue;
                    }
                    // The (zeros + 1)-th failure happens at index k.
                    e[(zeros + 1) * width + ones] += mass * law.fail_prob;
                    next[(zeros + 1) * width + ones] += mass * law.fail_prob;
                    next[zeros * width + ones + 1] += mass * law.one_prob;
                    next[zeros * width + ones] += mass * other;
                }
            }
            dist = next;
        }
        PrefixEventTables {
            m,
            e,
            e_prime: dist,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `P{E_{m,n}}`; zero outside `m + n <= M`.
    pub fn e(&self, m: usize, n: usize) -> f64 {
        if m + n > self.m {
            0.0
        } else {
            self.e[m * (self.m + 1) + n]
        }
    }

    /// `P{E'_{m,n}}`; zero outside `m + n <= M`.
    pub fn e_prime(&self, m: usize, n: usize) -> f64 {
        if m + n > self.m {
            0.0
        } else {
            self.e_prime[m * (self.m + 1) + n]
        }
    }
}

/// `binom(n, k)` exactly in 128-bit integers, `None` on overflow.
fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `ln binom(n, k)`, exact below the overflow guard and from log-gamma above.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    assert!(k <= n);
    match binomial_exact(n, k) {
        Some(v) => (v as f64).ln(),
        None => ln_binomial_gamma(n, k),
    }
}

fn ln_binomial_gamma(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `binom(top, k) s^k (1 - s)^r`: probability of `k` successes before the
/// `r`-th failure in Bernoulli(`s`) trials, with `top = k + r - 1`.
fn negative_binomial_term(k: usize, r: usize, s: f64) -> f64 {
    debug_assert!(r >= 1);
    if k == 0 {
        return (1.0 - s).powi(r as i32);
    }
    if s == 0.0 {
        return 0.0;
    }
    let top = (k + r - 1) as u64;
    if k + r <= LOG_SPACE_THRESHOLD {
        let coeff = binomial_exact(top, k as u64).expect("small binomials fit in u128") as f64;
        coeff * s.powi(k as i32) * (1.0 - s).powi(r as i32)
    } else {
        (ln_binomial(top, k as u64) + k as f64 * s.ln() + r as f64 * (1.0 - s).ln()).exp()
    }
}

/// An interval class `[lo, hi]` of the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpan {
    pub lo: usize,
    pub hi: usize,
}

/// Irreducible classes of `P` apart from the absorbing class `{0}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDecomposition {
    /// `[l_k, r_k]` for `k < K`, in increasing order.
    pub finite_classes: Vec<ClassSpan>,
    /// `l_K`. Absent in zero-q mode, where every class is finite.
    pub infinite_class_start: Option<usize>,
    /// Number of zero-strength cookies.
    pub zero_count: usize,
}

impl ClassDecomposition {
    /// Number of classes `K`, excluding `{0}`.
    pub fn k(&self) -> usize {
        self.finite_classes.len() + usize::from(self.infinite_class_start.is_some())
    }
}

/// Classes from the positions of the zero strengths.
///
/// `l = { n : #{j <= 2n-1 : p_j = 0} = n-1 and p_{2n-1} != 0 }`,
/// `r = { n : #{j <= 2n-1 : p_j = 0} = n-1 and p_{2n} = 0 }`,
/// scanning with `p_j = q` for `j > M`.
pub fn irreducible_classes(env: &CookieEnvironment) -> ClassDecomposition {
    let m = env.m();
    let is_zero = |j: usize| env.strength(j) == 0.0;
    let zeros_up_to = |last: usize| (1..=last).filter(|&j| is_zero(j)).count();
    let mut lefts = Vec::new();
    let mut rights = Vec::new();
    // In zero-q mode every index past M is a zero, so n <= M + 1 covers
    // all candidates there as well.
    for n in 1..=m + 1 {
        if zeros_up_to(2 * n - 1) != n - 1 {
            continue;
        }
        if !is_zero(2 * n - 1) {
            lefts.push(n);
        }
        if is_zero(2 * n) {
            rights.push(n);
        }
    }
    let finite_classes: Vec<ClassSpan> = lefts
        .iter()
        .zip(&rights)
        .map(|(&lo, &hi)| ClassSpan { lo, hi })
        .collect();
    let infinite_class_start = if lefts.len() > rights.len() {
        lefts.last().copied()
    } else {
        None
    };
    debug_assert!(lefts.len() == rights.len() || lefts.len() == rights.len() + 1);
    ClassDecomposition {
        finite_classes,
        infinite_class_start,
        zero_count: env.zero_count(),
    }
}

/// The matrix `P` for one environment, with memoized entries.
///
/// Entries are cached row by row behind a lock, so a shared matrix can be
/// read from several threads.
#[derive(Debug)]
pub struct CookieMatrix {
    env: CookieEnvironment,
    tables: PrefixEventTables,
    decomposition: ClassDecomposition,
    rows: RwLock<HashMap<usize, Vec<f64>>>,
    cell_budget: usize,
}

impl Clone for CookieMatrix {
    fn clone(&self) -> Self {
        CookieMatrix {
            env: self.env.clone(),
            tables: self.tables.clone(),
            decomposition: self.decomposition.clone(),
            rows: RwLock::new(self.rows.read().expect("row cache poisoned").clone()),
            cell_budget: self.cell_budget,
        }
    }
}

impl CookieMatrix {
    pub fn new(env: &CookieEnvironment) -> Self {
        CookieMatrix {
            env: env.clone(),
            tables: PrefixEventTables::build(env),
            decomposition: irreducible_classes(env),
            rows: RwLock::new(HashMap::new()),
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }

    pub fn with_cell_budget(mut self, budget: usize) -> Self {
        self.cell_budget = budget;
        self
    }

    pub fn env(&self) -> &CookieEnvironment {
        &self.env
    }

    pub fn tables(&self) -> &PrefixEventTables {
        &self.tables
    }

    pub fn decomposition(&self) -> &ClassDecomposition {
        &self.decomposition
    }

    /// `p(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if let Some(row) = self.rows.read().expect("row cache poisoned").get(&i) {
            if let Some(&v) = row.get(j) {
                return v;
            }
        }
        self.extend_row(i, j + 1);
        self.rows.read().expect("row cache poisoned")[&i][j]
    }

    /// Makes sure row `i` is cached for columns `0..len`.
    fn extend_row(&self, i: usize, len: usize) {
        let mut rows = self.rows.write().expect("row cache poisoned");
        let row = rows.entry(i).or_default();
        let start = row.len();
        if start < len {
            row.extend((start..len).map(|j| self.compute_entry(i, j)));
        }
    }

    /// `P{E_{i,j}} + sum_{n<=j, m<=i-1} P{E'_{m,n}} binom(j+i-m-n-1, j-n) s^(j-n) (1-s)^(i-m)`.
    fn compute_entry(&self, i: usize, j: usize) -> f64 {
        if i == 0 {
            return if j == 0 { 1.0 } else { 0.0 };
        }
        let s = self.env.s();
        let mm = self.tables.m();
        let mut total = self.tables.e(i, j);
        for n in 0..=j.min(mm) {
            for m in 0..=(i - 1).min(mm - n) {
                let prefix = self.tables.e_prime(m, n);
                if prefix == 0.0 {
                    continue;
                }
                total += prefix * negative_binomial_term(j - n, i - m, s);
            }
        }
        // Rounding can push a probability marginally past the ends.
        if total > 1.0 && total <= 1.0 + 1e-14 {
            1.0
        } else if (-1e-14..0.0).contains(&total) {
            0.0
        } else {
            total
        }
    }

    /// Dense view `(p(i, j))` for `lo <= i, j <= hi`.
    pub fn truncate(&self, lo: usize, hi: usize) -> Result<Array2<f64>, MatrixError> {
        if lo > hi {
            return Err(MatrixError::IndexError { lo, hi });
        }
        let n = hi - lo + 1;
        let cells = n.saturating_mul(n);
        if cells > self.cell_budget {
            return Err(MatrixError::AllocationLimit {
                cells,
                budget: self.cell_budget,
            });
        }
        for i in lo..=hi {
            self.extend_row(i, hi + 1);
        }
        let rows = self.rows.read().expect("row cache poisoned");
        Ok(Array2::from_shape_fn((n, n), |(a, c)| rows[&(lo + a)][lo + c]))
    }

    /// `sum_{j <= last} p(i, j)`.
    pub fn row_partial_sum(&self, i: usize, last: usize) -> f64 {
        self.extend_row(i, last + 1);
        self.rows.read().expect("row cache poisoned")[&i][..=last].iter().sum()
    }
}
