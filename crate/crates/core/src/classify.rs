//! Recurrence/transience verdicts, phase boundaries and the monotonicity law.
//!
//! With `lambda` the largest class radius of the cookie environment matrix:
//! the walk is transient when `q >= b/(b+1)` or `lambda > 1/b`, recurrent when
//! `q < b/(b+1)` and `lambda <= 1/b`, and positive recurrent when moreover
//! `lambda < 1/b`. Verdicts carry a tolerance band around `1/b`; values inside
//! it are reported as critical (and recurrent).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{CookieEnvironment, EnvError, GwEnvironment, Mode};
use crate::spectral::{lambda_max, SpectralError, TruncationOptions};

/// Default width of the critical band around `1/b`.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("lambda = {lambda} lies within {tol} of the threshold {threshold} but the truncation did not converge")]
    Inconclusive { lambda: f64, threshold: f64, tol: f64 },
    #[error("verdicts need q > 0; zero-q environments are classified by their stuck probability")]
    ZeroQ,
    #[error("both endpoints classify as {0:?}")]
    NoSignChange(Side),
    #[error("verdicts along the parameter are not monotone (sign changes at {0:?})")]
    NonMonotone(Vec<f64>),
    #[error("environments are not comparable in the componentwise order")]
    NotComparable,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Transient,
    Recurrent,
    PositiveRecurrent,
}

impl Outcome {
    pub fn is_transient(self) -> bool {
        self == Outcome::Transient
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    /// `|lambda - threshold| <= tol`.
    pub critical: bool,
    /// Decided by `q >= b/(b+1)` (or `alpha >= 1`) without spectral work.
    pub shortcut: bool,
    pub lambda: Option<f64>,
    pub threshold: f64,
    pub tol: f64,
}

/// Applies the threshold rule to a known `lambda`.
pub fn verdict_from_lambda(lambda: f64, threshold: f64, tol: f64) -> Verdict {
    let (outcome, critical) = if lambda > threshold + tol {
        (Outcome::Transient, false)
    } else if lambda < threshold - tol {
        (Outcome::PositiveRecurrent, false)
    } else {
        (Outcome::Recurrent, true)
    };
    Verdict {
        outcome,
        critical,
        shortcut: false,
        lambda: Some(lambda),
        threshold,
        tol,
    }
}

fn shortcut_verdict(threshold: f64, tol: f64) -> Verdict {
    Verdict {
        outcome: Outcome::Transient,
        critical: false,
        shortcut: true,
        lambda: None,
        threshold,
        tol,
    }
}

/// Verdict with the spectral truncation tolerance set to `tol`.
pub fn verdict(env: &CookieEnvironment, tol: f64) -> Result<Verdict, ClassifyError> {
    let opts = TruncationOptions {
        tol: tol.min(crate::spectral::DEFAULT_TRUNCATION_TOL),
        ..TruncationOptions::default()
    };
    verdict_with(env, tol, opts)
}

pub fn verdict_with(
    env: &CookieEnvironment,
    tol: f64,
    opts: TruncationOptions,
) -> Result<Verdict, ClassifyError> {
    if env.mode() == Mode::ZeroQ {
        return Err(ClassifyError::ZeroQ);
    }
    let threshold = 1.0 / env.b() as f64;
    if env.q() >= env.critical_q() {
        return Ok(shortcut_verdict(threshold, tol));
    }
    let spectrum = lambda_max(env, opts)?;
    classify_spectrum(spectrum.lambda_max, spectrum.converged, threshold, tol)
}

fn classify_spectrum(lambda: f64, converged: bool, threshold: f64, tol: f64) -> Result<Verdict, ClassifyError> {
    let v = verdict_from_lambda(lambda, threshold, tol);
    if v.critical && !converged {
        return Err(ClassifyError::Inconclusive { lambda, threshold, tol });
    }
    Ok(v)
}

/// Verdict for a walk on a Galton-Watson tree with mean offspring `E[B]`:
/// transient iff `alpha >= 1` or `lambda > 1/E[B]`.
///
/// Below the threshold the outcome is `Recurrent`; positive recurrence is not
/// claimed on random trees.
pub fn verdict_gw(gw: &GwEnvironment, tol: f64) -> Result<Verdict, ClassifyError> {
    let mapping = gw.map(2)?;
    if mapping.alpha_shortcut {
        return Ok(shortcut_verdict(mapping.threshold, tol));
    }
    let opts = TruncationOptions {
        tol: tol.min(crate::spectral::DEFAULT_TRUNCATION_TOL),
        ..TruncationOptions::default()
    };
    let spectrum = lambda_max(&mapping.env, opts)?;
    let mut v = classify_spectrum(spectrum.lambda_max, spectrum.converged, mapping.threshold, tol)?;
    if v.outcome == Outcome::PositiveRecurrent {
        v.outcome = Outcome::Recurrent;
    }
    Ok(v)
}

/// Which side of the phase boundary a parameter value falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Recurrent,
    Transient,
}

impl From<Outcome> for Side {
    fn from(outcome: Outcome) -> Self {
        match outcome {
            Outcome::Transient => Side::Transient,
            _ => Side::Recurrent,
        }
    }
}

/// One-parameter family of environments.
pub struct Family {
    pub name: String,
    build: Box<dyn Fn(f64) -> Result<CookieEnvironment, EnvError> + Send + Sync>,
}

impl std::fmt::Debug for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Family").field("name", &self.name).finish()
    }
}

impl Family {
    pub fn new(
        name: impl Into<String>,
        build: impl Fn(f64) -> Result<CookieEnvironment, EnvError> + Send + Sync + 'static,
    ) -> Self {
        Family {
            name: name.into(),
            build: Box::new(build),
        }
    }

    /// `(p; q)` with `p` free.
    pub fn once_excited_p(b: u32, q: f64) -> Self {
        Family::new(format!("once-excited(p; q={q})"), move |p| CookieEnvironment::new(b, vec![p], q))
    }

    /// `(p; q)` with `q` free.
    pub fn once_excited_q(b: u32, p: f64) -> Self {
        Family::new(format!("once-excited(p={p}; q)"), move |q| CookieEnvironment::new(b, vec![p], q))
    }

    /// `(0, ..., 0; q)` with `M` zeros and `q` free.
    pub fn digging_q(b: u32, m: usize) -> Self {
        Family::new(format!("digging(M={m}; q)"), move |q| CookieEnvironment::new(b, vec![0.0; m], q))
    }

    /// `(p, p, 0, ..., 0; q)` with `zeros >= 2` trailing zeros and `p` free.
    pub fn pair_zeros_p(b: u32, zeros: usize, q: f64) -> Self {
        Family::new(format!("pair-zeros(p, p, 0 x {zeros}; q={q})"), move |p| {
            let mut strengths = vec![p, p];
            strengths.extend(std::iter::repeat_n(0.0, zeros));
            CookieEnvironment::new(b, strengths, q)
        })
    }

    pub fn env(&self, param: f64) -> Result<CookieEnvironment, EnvError> {
        (self.build)(param)
    }

    pub fn side(&self, param: f64, tol: f64) -> Result<Side, ClassifyError> {
        Ok(verdict(&self.env(param)?, tol)?.outcome.into())
    }
}

/// Result of [`phase_boundary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub param: f64,
    /// Bracket `[lo, hi]` of width at most the requested tolerance.
    pub bracket: (f64, f64),
    pub side_below: Side,
}

/// Number of interior points sampled before bisection.
pub const MONOTONICITY_SAMPLES: usize = 16;

/// Locates the parameter where the verdict flips between recurrent and
/// transient, by bisection to width `tol`. The verdict band is `band`.
///
/// Before bisecting, the range is sampled at [`MONOTONICITY_SAMPLES`] interior
/// points; more than one sign change is an error.
pub fn phase_boundary(family: &Family, range: (f64, f64), tol: f64, band: f64) -> Result<Boundary, ClassifyError> {
    let (a, b) = range;
    let side_a = family.side(a, band)?;
    let side_b = family.side(b, band)?;
    if side_a == side_b {
        return Err(ClassifyError::NoSignChange(side_a));
    }
    let steps = MONOTONICITY_SAMPLES + 1;
    let mut changes = Vec::new();
    let mut previous = side_a;
    let mut lo = a;
    let mut hi = b;
    for k in 1..=steps {
        let x = if k == steps { b } else { a + (b - a) * k as f64 / steps as f64 };
        let side = if k == steps { side_b } else { family.side(x, band)? };
        if side != previous {
            changes.push(x);
            hi = x;
            lo = a + (b - a) * (k - 1) as f64 / steps as f64;
        }
        previous = side;
    }
    if changes.len() != 1 {
        return Err(ClassifyError::NonMonotone(changes));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if family.side(mid, band)? == side_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Boundary {
        param: 0.5 * (lo + hi),
        bracket: (lo, hi),
        side_below: side_a,
    })
}

/// The once-excited boundary on the binary tree: `p(q) = (4q - 2 - q^2) / (3q - 2)`.
pub fn once_excited_boundary_b2(q: f64) -> f64 {
    (4.0 * q - 2.0 - q * q) / (3.0 * q - 2.0)
}

/// Result of [`monotonicity_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub lower: Verdict,
    pub upper: Verdict,
    /// A critical verdict on either side; not counted as a violation.
    pub skipped: bool,
    pub consistent: bool,
}

/// Checks that transience propagates upward and recurrence downward in the
/// componentwise order. Arguments may be given in either order.
pub fn monotonicity_probe(
    a: &CookieEnvironment,
    b: &CookieEnvironment,
    tol: f64,
) -> Result<MonotonicityReport, ClassifyError> {
    use std::cmp::Ordering;
    let (lo, hi) = match a.partial_cmp_env(b).ok_or(ClassifyError::NotComparable)? {
        Ordering::Greater => (b, a),
        _ => (a, b),
    };
    let lower = match verdict(lo, tol) {
        Err(ClassifyError::Inconclusive { .. }) => None,
        other => Some(other?),
    };
    let upper = match verdict(hi, tol) {
        Err(ClassifyError::Inconclusive { .. }) => None,
        other => Some(other?),
    };
    let (Some(lower), Some(upper)) = (lower, upper) else {
        // An inconclusive side is reported as skipped with a placeholder.
        let placeholder = verdict_from_lambda(1.0 / lo.b() as f64, 1.0 / lo.b() as f64, tol);
        return Ok(MonotonicityReport {
            lower: lower.unwrap_or(placeholder),
            upper: upper.unwrap_or(placeholder),
            skipped: true,
            consistent: true,
        });
    };
    let skipped = lower.critical || upper.critical;
    let violation = lower.outcome.is_transient() && !upper.outcome.is_transient();
    Ok(MonotonicityReport {
        lower,
        upper,
        skipped,
        consistent: skipped || !violation,
    })
}
