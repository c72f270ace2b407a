//! Spectral radii of the irreducible classes of the cookie environment matrix.
//!
//! Finite classes use power iteration with Collatz-Wielandt bounds. The
//! infinite class `[l_K, inf)` is approximated by finite windows
//! `[l_K, l_K + N]` with `N` doubling; the radii of these windows increase
//! monotonically to the radius of the infinite class.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{CookieEnvironment, EnvError};
use crate::pmatrix::{ClassSpan, CookieMatrix, MatrixError};

pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_POWER_TOL: f64 = 1e-12;
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;
pub const DEFAULT_N_MAX: usize = 4096;
/// First window size of the truncation sequence.
pub const FIRST_WINDOW: usize = 16;

/// Decrease between consecutive window radii tolerated as rounding.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("power iteration did not converge in {iterations} iterations (bounds {lower}..{upper})")]
    NonConvergence {
        iterations: usize,
        lower: f64,
        upper: f64,
    },
    #[error("matrix is empty or not square")]
    BadShape,
    #[error("matrix is reducible")]
    Reducible,
    #[error("truncation budget exhausted at N = {n}; last radius {radius}")]
    BudgetExceeded { n: usize, radius: f64 },
    #[error("truncation radius decreased from {previous} to {current} at N = {n}")]
    NonMonotoneTrace { n: usize, previous: f64, current: f64 },
    #[error("test vector (s/(1-s))^i diverges: s = {s} >= 1/2")]
    DivergentTestVector { s: f64 },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Options for the power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    /// Relative width of the Collatz-Wielandt bracket at convergence.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: DEFAULT_POWER_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Dominant eigenpair of a finite nonnegative irreducible matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronFrobenius {
    pub radius: f64,
    /// Right eigenvector, unit 1-norm.
    pub right: Array1<f64>,
    /// Left eigenvector, unit 1-norm.
    pub left: Array1<f64>,
    pub iterations: usize,
}

/// Radius and right vector only. `x <- A x` from the all-ones vector, stopped
/// when `max_i (Ax)_i / x_i` and `min_i (Ax)_i / x_i`, which bracket the
/// radius, agree to `tol` relative.
fn power_right(
    a: ArrayView2<'_, f64>,
    opts: PowerOptions,
) -> Result<(f64, Array1<f64>, usize), SpectralError> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(SpectralError::BadShape);
    }
    let mut x = Array1::from_elem(n, 1.0 / n as f64);
    let (mut lower, mut upper) = (0.0, f64::INFINITY);
    for iteration in 1..=opts.max_iterations {
        let y = a.dot(&x);
        lower = f64::INFINITY;
        upper = 0.0f64;
        for (&yi, &xi) in y.iter().zip(x.iter()) {
            if xi > 0.0 {
                let ratio = yi / xi;
                lower = lower.min(ratio);
                upper = upper.max(ratio);
            } else if yi > 0.0 {
                upper = f64::INFINITY;
            }
        }
        let norm = y.sum();
        if norm == 0.0 {
            // Nilpotent, hence not irreducible unless 1x1 zero.
            return Ok((0.0, x, iteration));
        }
        x = y / norm;
        if upper - lower <= opts.tol * upper {
            return Ok((0.5 * (upper + lower), x, iteration));
        }
    }
    Err(SpectralError::NonConvergence {
        iterations: opts.max_iterations,
        lower,
        upper,
    })
}

/// Perron-Frobenius radius with right and left vectors.
///
/// Reducible inputs are rejected up front; a periodic one shows up as
/// [`SpectralError::NonConvergence`].
pub fn pf_radius_finite(
    dense: ArrayView2<'_, f64>,
    opts: PowerOptions,
) -> Result<PerronFrobenius, SpectralError> {
    if dense.nrows() == 0 || dense.ncols() != dense.nrows() {
        return Err(SpectralError::BadShape);
    }
    if !strongly_connected(dense) {
        return Err(SpectralError::Reducible);
    }
    let (radius, right, iterations) = power_right(dense, opts)?;
    let transposed = dense.t();
    let (left_radius, left, _) = power_right(transposed, opts)?;
    if (left_radius - radius).abs() > 10.0 * opts.tol * radius.max(f64::MIN_POSITIVE) {
        return Err(SpectralError::NonConvergence {
            iterations,
            lower: radius.min(left_radius),
            upper: radius.max(left_radius),
        });
    }
    Ok(PerronFrobenius {
        radius,
        right,
        left,
        iterations,
    })
}

/// Every index reaches index 0 and is reached from it along positive entries.
fn strongly_connected(a: ArrayView2<'_, f64>) -> bool {
    let n = a.nrows();
    let reach_all = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for (j, flag) in seen.iter_mut().enumerate() {
                let w = if forward { a[[i, j]] } else { a[[j, i]] };
                if w > 0.0 && !*flag {
                    *flag = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|v| v)
    };
    reach_all(true) && reach_all(false)
}

/// How a class radius was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusMethod {
    FinitePf,
    TruncatedLimit,
}

/// Radius of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRadius {
    pub lo: usize,
    /// `None` for the infinite class.
    pub hi: Option<usize>,
    pub radius: f64,
    pub method: RadiusMethod,
}

/// Outcome of the window-doubling approximation of the infinite class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteClassRadius {
    pub radius: f64,
    /// `(N, radius of window [l_K, l_K + N])` in doubling order.
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
    /// Aitken extrapolation of the last three radii; diagnostic only.
    pub extrapolated: Option<f64>,
}

/// Options for [`radius_infinite_class`] and [`lambda_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationOptions {
    /// Stop when consecutive window radii differ by less than this.
    pub tol: f64,
    /// Largest window size `N`.
    pub n_max: usize,
    pub power: PowerOptions,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        TruncationOptions {
            tol: DEFAULT_TRUNCATION_TOL,
            n_max: DEFAULT_N_MAX,
            power: PowerOptions::default(),
        }
    }
}

fn aitken(trace: &[(usize, f64)]) -> Option<f64> {
    let [.., (_, a), (_, b), (_, c)] = trace else {
        return None;
    };
    let denom = c - 2.0 * b + a;
    if denom.abs() < 1e-300 {
        return Some(*c);
    }
    Some(c - (c - b) * (c - b) / denom)
}

/// Radius of the infinite class by doubling windows `[l_K, l_K + N]`,
/// `N = 16, 32, ...`, until two consecutive radii agree to `tol` or `N`
/// exceeds `n_max`. Unconverged runs still return their last radius.
pub fn radius_infinite_class(
    matrix: &CookieMatrix,
    opts: TruncationOptions,
) -> Result<Option<InfiniteClassRadius>, SpectralError> {
    let Some(start) = matrix.decomposition().infinite_class_start else {
        return Ok(None);
    };
    let mut trace: Vec<(usize, f64)> = Vec::new();
    let mut n = FIRST_WINDOW;
    let mut converged = false;
    while n <= opts.n_max.max(FIRST_WINDOW) {
        let window = matrix.truncate(start, start + n)?;
        let (radius, _, _) = power_right(window.view(), opts.power)?;
        if let Some(&(_, previous)) = trace.last() {
            if radius < previous - MONOTONE_SLACK {
                return Err(SpectralError::NonMonotoneTrace {
                    n,
                    previous,
                    current: radius,
                });
            }
            trace.push((n, radius));
            if (radius - previous).abs() < opts.tol {
                converged = true;
                break;
            }
        } else {
            trace.push((n, radius));
        }
        n *= 2;
    }
    let radius = trace.last().map(|&(_, r)| r).unwrap_or(0.0);
    Ok(Some(InfiniteClassRadius {
        radius,
        extrapolated: aitken(&trace),
        trace,
        converged,
    }))
}

/// Radii of all classes and their maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpectrum {
    pub radii: Vec<ClassRadius>,
    /// `max` of the class radii; 0 when there are no classes besides `{0}`.
    pub lambda_max: f64,
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub extrapolated: Option<f64>,
}

impl ClassSpectrum {
    /// Turns an unconverged truncation into [`SpectralError::BudgetExceeded`].
    pub fn require_converged(self) -> Result<Self, SpectralError> {
        if self.converged {
            Ok(self)
        } else {
            Err(SpectralError::BudgetExceeded {
                n: self.trace.last().map_or(0, |&(n, _)| n),
                radius: self.lambda_max,
            })
        }
    }
}

fn finite_class_radius(
    matrix: &CookieMatrix,
    span: ClassSpan,
    opts: PowerOptions,
) -> Result<f64, SpectralError> {
    let block = matrix.truncate(span.lo, span.hi)?;
    Ok(pf_radius_finite(block.view(), opts)?.radius)
}

/// Every class radius of `P(env)`: Perron-Frobenius on the finite classes,
/// window doubling on the infinite one.
pub fn lambda_max(env: &CookieEnvironment, opts: TruncationOptions) -> Result<ClassSpectrum, SpectralError> {
    lambda_max_of(&CookieMatrix::new(env), opts)
}

pub fn lambda_max_of(matrix: &CookieMatrix, opts: TruncationOptions) -> Result<ClassSpectrum, SpectralError> {
    let mut radii = Vec::new();
    for &span in &matrix.decomposition().finite_classes {
        radii.push(ClassRadius {
            lo: span.lo,
            hi: Some(span.hi),
            radius: finite_class_radius(matrix, span, opts.power)?,
            method: RadiusMethod::FinitePf,
        });
    }
    let infinite = radius_infinite_class(matrix, opts)?;
    let (trace, converged, extrapolated) = match infinite {
        Some(inf) => {
            radii.push(ClassRadius {
                lo: matrix.decomposition().infinite_class_start.unwrap_or_default(),
                hi: None,
                radius: inf.radius,
                method: RadiusMethod::TruncatedLimit,
            });
            (inf.trace, inf.converged, inf.extrapolated)
        }
        None => (Vec::new(), true, None),
    };
    let lambda_max = radii.iter().map(|r| r.radius).fold(0.0, f64::max);
    Ok(ClassSpectrum {
        radii,
        lambda_max,
        trace,
        converged,
        extrapolated,
    })
}

/// Defect of the exponential test vector `Y_i = (s/(1-s))^(i-1)` at column `j`:
/// `sum_i p(i, j) Y_i = lambda_sym Y_j + A(j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDefect {
    pub column: usize,
    /// `A(j)` from its closed double sum.
    pub formula: f64,
    /// `sum_{i <= trunc} p(i, j) Y_i - lambda_sym Y_j`.
    pub residual: f64,
    /// Bound on the neglected tail `sum_{i > trunc} p(i, j) Y_i`.
    pub tail_bound: f64,
}

impl EigenDefect {
    /// Whether the two evaluations agree within the tail bound (plus rounding).
    pub fn consistent(&self, rounding: f64) -> bool {
        (self.formula - self.residual).abs() <= self.tail_bound + rounding
    }
}

/// Evaluates `A(j)` by formula and by truncated series. Requires `s < 1/2`.
pub fn sym_defect(matrix: &CookieMatrix, j: usize, trunc: usize) -> Result<EigenDefect, SpectralError> {
    let env = matrix.env();
    let lambda_sym = env.lambda_sym()?;
    let s = env.s();
    if s >= 0.5 {
        return Err(SpectralError::DivergentTestVector { s });
    }
    let ratio = env.c();
    let tables = matrix.tables();
    let m = tables.m();

    let mut formula = 0.0;
    for i in 1..=m.saturating_sub(j) {
        formula += tables.e(i, j) * ratio.powi(i as i32 - 1);
    }
    for n in j + 1..=m {
        for mm in 0..=m - n {
            formula -= tables.e_prime(mm, n) * ratio.powi(j as i32 + mm as i32 - n as i32);
        }
    }

    let series: f64 = (1..=trunc).map(|i| matrix.entry(i, j) * ratio.powi(i as i32 - 1)).sum();
    let residual = series - lambda_sym * ratio.powi(j as i32 - 1);
    // p(i, j) <= 1, so the tail is at most sum_{i > trunc} ratio^(i-1).
    let tail_bound = ratio.powi(trunc as i32) / (1.0 - ratio);
    Ok(EigenDefect {
        column: j,
        formula,
        residual,
        tail_bound,
    })
}

/// `|| Y^T P_w - lambda_sym Y^T ||_1 / || Y ||_1` over the window
/// `w = [l_K, l_K + n]`, with `Y_i = (s/(1-s))^(i-1)`.
pub fn left_residual(matrix: &CookieMatrix, n: usize) -> Result<f64, SpectralError> {
    let env = matrix.env();
    let lambda_sym = env.lambda_sym()?;
    let Some(start) = matrix.decomposition().infinite_class_start else {
        return Ok(0.0);
    };
    let ratio = env.c();
    let window = matrix.truncate(start, start + n)?;
    let y = Array1::from_shape_fn(n + 1, |k| ratio.powi((start + k) as i32 - 1));
    let image = window.t().dot(&y);
    let defect: f64 = image.iter().zip(y.iter()).map(|(a, b)| (a - lambda_sym * b).abs()).sum();
    Ok(defect / y.sum())
}

/// 2x2 helper for tests and diagnostics: dominant eigenvalue by the
/// quadratic formula.
pub fn dominant_eigenvalue_2x2(a: &Array2<f64>) -> f64 {
    let tr = a[[0, 0]] + a[[1, 1]];
    let det = a[[0, 0]] * a[[1, 1]] - a[[0, 1]] * a[[1, 0]];
    0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt())
}
