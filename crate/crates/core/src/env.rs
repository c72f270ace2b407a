//! Cookie environments on the rooted `b`-ary tree and their closed-form
//! spectral quantities.
//!
//! A cookie environment `(p_1, ..., p_M; q)` assigns to the `j`-th visit of
//! every vertex the probability `p_j` of stepping to a uniformly chosen child
//! (and `1 - p_j` of stepping to the father). Once the `M` cookies of a vertex
//! are consumed the walk uses the bias `q`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("{what} = {value} is out of range ({expected})")]
    OutOfRange {
        what: String,
        value: f64,
        expected: &'static str,
    },
    #[error("an environment needs at least one cookie")]
    EmptyCookieList,
    #[error("quantity is undefined when q = 0")]
    UndefinedForZeroQ,
    #[error("internal numerical error: {0}")]
    Internal(String),
}

/// Whether `q = 0` is admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// `q` in `(0, 1)`.
    #[default]
    Standard,
    /// `q = 0`: once the cookies are gone the walk always steps to the father.
    ZeroQ,
}

/// A validated cookie environment. Strength order is significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment", into = "RawEnvironment")]
pub struct CookieEnvironment {
    b: u32,
    strengths: Vec<f64>,
    q: f64,
    mode: Mode,
}

/// Unchecked environment description, as read from flags or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEnvironment {
    pub b: u32,
    pub strengths: Vec<f64>,
    pub q: f64,
    #[serde(default)]
    pub mode: Mode,
}

impl TryFrom<RawEnvironment> for CookieEnvironment {
    type Error = EnvError;

    fn try_from(raw: RawEnvironment) -> Result<Self, EnvError> {
        validate(raw)
    }
}

impl From<CookieEnvironment> for RawEnvironment {
    fn from(env: CookieEnvironment) -> Self {
        RawEnvironment {
            b: env.b,
            strengths: env.strengths,
            q: env.q,
            mode: env.mode,
        }
    }
}

fn is_probability_below_one(x: f64) -> bool {
    (0.0..1.0).contains(&x)
}

/// Checks the constraints of a cookie environment. Nothing is normalized.
pub fn validate(raw: RawEnvironment) -> Result<CookieEnvironment, EnvError> {
    if raw.b < 2 {
        return Err(EnvError::OutOfRange {
            what: "b".into(),
            value: raw.b as f64,
            expected: "b >= 2",
        });
    }
    if raw.strengths.is_empty() {
        return Err(EnvError::EmptyCookieList);
    }
    for (i, &p) in raw.strengths.iter().enumerate() {
        if !is_probability_below_one(p) {
            return Err(EnvError::OutOfRange {
                what: format!("p{}", i + 1),
                value: p,
                expected: "0 <= p < 1",
            });
        }
    }
    match raw.mode {
        Mode::Standard if !(raw.q > 0.0 && raw.q < 1.0) => Err(EnvError::OutOfRange {
            what: "q".into(),
            value: raw.q,
            expected: "0 < q < 1",
        }),
        Mode::ZeroQ if raw.q != 0.0 => Err(EnvError::OutOfRange {
            what: "q".into(),
            value: raw.q,
            expected: "q = 0 in zero-q mode",
        }),
        _ => Ok(CookieEnvironment {
            b: raw.b,
            strengths: raw.strengths,
            q: raw.q,
            mode: raw.mode,
        }),
    }
}

/// Law of `xi_i`: 0 is a failure, each of `1..=b` has probability `one_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiLaw {
    pub index: usize,
    pub fail_prob: f64,
    pub one_prob: f64,
    pub each_other_prob: f64,
}

impl CookieEnvironment {
    pub fn new(b: u32, strengths: Vec<f64>, q: f64) -> Result<Self, EnvError> {
        validate(RawEnvironment {
            b,
            strengths,
            q,
            mode: Mode::Standard,
        })
    }

    /// Environment with `q = 0`.
    pub fn zero_q(b: u32, strengths: Vec<f64>) -> Result<Self, EnvError> {
        validate(RawEnvironment {
            b,
            strengths,
            q: 0.0,
            mode: Mode::ZeroQ,
        })
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    /// Number of cookies `M`.
    pub fn m(&self) -> usize {
        self.strengths.len()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Strength used on the `j`-th visit (1-based); `q` once `j > M`.
    pub fn strength(&self, j: usize) -> f64 {
        debug_assert!(j >= 1);
        self.strengths.get(j - 1).copied().unwrap_or(self.q)
    }

    /// Number of zero-strength cookies, `M0`.
    pub fn zero_count(&self) -> usize {
        self.strengths.iter().filter(|&&p| p == 0.0).count()
    }

    /// `s = q / (q + (1 - q) b)`: probability that a draw past the cookies is
    /// a 1 given that it is a 0 or a 1.
    pub fn s(&self) -> f64 {
        let b = self.b as f64;
        self.q / (self.q + (1.0 - self.q) * b)
    }

    /// `c = q / (b (1 - q))`, which also equals `s / (1 - s)`.
    pub fn c(&self) -> f64 {
        c_of(self.q, self.b)
    }

    /// `b / (b + 1)`, the bias of the simple random walk on the tree.
    pub fn critical_q(&self) -> f64 {
        critical_q(self.b)
    }

    pub fn xi_law(&self, i: usize) -> XiLaw {
        assert!(i >= 1, "xi indices start at 1");
        let p = self.strength(i);
        let each = p / self.b as f64;
        XiLaw {
            index: i,
            fail_prob: 1.0 - p,
            one_prob: each,
            each_other_prob: each,
        }
    }

    /// Componentwise comparison of `(p_1, ..., p_M, q)`; `None` when the two
    /// environments are not comparable (including different `b` or `M`).
    pub fn partial_cmp_env(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering;
        if self.b != other.b || self.m() != other.m() {
            return None;
        }
        let lhs = self.strengths.iter().chain(std::iter::once(&self.q));
        let rhs = other.strengths.iter().chain(std::iter::once(&other.q));
        let (mut le, mut ge) = (true, true);
        for (a, b) in lhs.zip(rhs) {
            le &= a <= b;
            ge &= a >= b;
        }
        match (le, ge) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }

    /// The symmetric product formula, see [`lambda_sym`].
    pub fn lambda_sym(&self) -> Result<f64, EnvError> {
        lambda_sym(self)
    }
}

pub fn critical_q(b: u32) -> f64 {
    let b = b as f64;
    b / (b + 1.0)
}

fn c_of(q: f64, b: u32) -> f64 {
    q / (b as f64 * (1.0 - q))
}

/// `c * prod_i [(1 - p_i) c + (b - 1) p_i / b + (p_i / b) / c]` with
/// `c = q / (b (1 - q))`.
///
/// Equals the spectral radius of the infinite class when the first
/// `floor(M/2)` strengths vanish and `q < b/(b+1)`; computed for any `q > 0`.
pub fn lambda_sym(env: &CookieEnvironment) -> Result<f64, EnvError> {
    if env.q == 0.0 {
        return Err(EnvError::UndefinedForZeroQ);
    }
    let b = env.b as f64;
    let c = env.c();
    let product: f64 = env
        .strengths
        .iter()
        .map(|&p| (1.0 - p) * c + (b - 1.0) * p / b + (p / b) / c)
        .product();
    Ok(c * product)
}

/// Spectral radius for the once-excited environment `(p; q)`.
pub fn lambda_once(p: f64, q: f64, b: u32) -> f64 {
    let c = c_of(q, b);
    let bf = b as f64;
    (1.0 - p) * c * c + ((bf - 1.0) * p / bf) * c + p / bf
}

/// Spectral radius `c^(M+1)` for the `M`-digging environment `(0, ..., 0; q)`.
pub fn lambda_dig(m: usize, q: f64, b: u32) -> f64 {
    c_of(q, b).powi(m as i32 + 1)
}

/// The 2x2 class matrix on states `{1, 2}` for environments `(p1, p2, 0, ..., 0; q)`.
pub fn pair_class_matrix(p1: f64, p2: f64, b: u32) -> [[f64; 2]; 2] {
    let b = b as f64;
    let pp = p1 * p2;
    [
        [p1 / b + pp / b - 2.0 * pp / (b * b), pp / (b * b)],
        [(p1 + p2) / b - 2.0 * pp / (b * b), pp / (b * b)],
    ]
}

/// Largest eigenvalue of [`pair_class_matrix`], in closed form. Not symmetric
/// in `(p1, p2)`.
pub fn nu(p1: f64, p2: f64, b: u32) -> Result<f64, EnvError> {
    let bf = b as f64;
    let radicand = (bf * bf - 6.0 * bf + 1.0) * p1 * p1 * p2 * p2
        + 2.0 * bf * (bf - 1.0) * p1 * p1 * p2
        + bf * bf * p1 * p1
        + 4.0 * bf * p1 * p2 * p2;
    if radicand < -1e-12 {
        return Err(EnvError::Internal(format!(
            "negative radicand {radicand} in nu({p1}, {p2}, {b})"
        )));
    }
    let root = radicand.max(0.0).sqrt();
    Ok(((bf - 1.0) * p1 * p2 + bf * p1 + root) / (2.0 * bf * bf))
}

/// Probability that the `(p1, p2; 0)` walk eventually gets stuck at the root.
pub fn stuck_probability_closed_form(p1: f64, p2: f64, b: u32) -> Result<f64, EnvError> {
    let bf = b as f64;
    if nu(p1, p2, b)? <= 1.0 / bf {
        return Ok(1.0);
    }
    let numerator = (1.0 - p1)
        * (bf + bf * p2 + p1 * p1 * p2.powi(3)
            - bf * p1 * p2 * p2
            - p1 * p2.powi(3)
            - bf * p1 * p2);
    Ok(numerator / (p1 * p2 * (bf - 1.0)))
}

/// Cookie environment for a walk on a Galton-Watson tree: on a vertex with
/// `B` children the cookie of strength `beta` sends the walk to the father
/// with probability `1 / (1 + B beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwEnvironment {
    pub betas: Vec<f64>,
    pub alpha: f64,
    pub offspring_mean: f64,
}

/// Regular-tree equivalent of a [`GwEnvironment`].
#[derive(Debug, Clone, PartialEq)]
pub struct GwMapping {
    pub env: CookieEnvironment,
    /// Transience threshold `1 / E[B]` for the spectral radius.
    pub threshold: f64,
    /// `alpha >= 1`: transient whatever the strengths.
    pub alpha_shortcut: bool,
}

impl GwEnvironment {
    pub fn new(betas: Vec<f64>, alpha: f64, offspring_mean: f64) -> Result<Self, EnvError> {
        if betas.is_empty() {
            return Err(EnvError::EmptyCookieList);
        }
        if let Some((i, &beta)) = betas
            .iter()
            .enumerate()
            .find(|(_, beta)| !(beta.is_finite() && **beta >= 0.0))
        {
            return Err(EnvError::OutOfRange {
                what: format!("beta{}", i + 1),
                value: beta,
                expected: "finite beta >= 0",
            });
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(EnvError::OutOfRange {
                what: "alpha".into(),
                value: alpha,
                expected: "finite alpha > 0",
            });
        }
        if !(offspring_mean.is_finite() && offspring_mean > 1.0) {
            return Err(EnvError::OutOfRange {
                what: "E[B]".into(),
                value: offspring_mean,
                expected: "1 < E[B] < infinity",
            });
        }
        Ok(GwEnvironment {
            betas,
            alpha,
            offspring_mean,
        })
    }

    /// Maps to `p_i = b beta_i / (b beta_i + 1)`, `q = b alpha / (b alpha + 1)`.
    /// The resulting matrix does not depend on `b_probe`.
    pub fn map(&self, b_probe: u32) -> Result<GwMapping, EnvError> {
        let b = b_probe as f64;
        let strengths = self.betas.iter().map(|&beta| b * beta / (b * beta + 1.0)).collect();
        let q = b * self.alpha / (b * self.alpha + 1.0);
        Ok(GwMapping {
            env: CookieEnvironment::new(b_probe, strengths, q)?,
            threshold: 1.0 / self.offspring_mean,
            alpha_shortcut: self.alpha >= 1.0,
        })
    }
}
