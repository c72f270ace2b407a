//! Recurrence and transience of multi-excited (cookie) random walks on
//! regular trees.
//!
//! * [`env`]: cookie environments and closed-form spectral quantities.
//! * [`pmatrix`]: the cookie environment matrix and its irreducible classes.
//! * [`spectral`]: per-class spectral radii.
//! * [`classify`]: the recurrence/transience verdict and phase boundaries.
//! * [`simulate`]: reproducible Monte Carlo for the walk and its branching chains.

pub mod classify;
pub mod env;
pub mod pmatrix;
pub mod simulate;
pub mod spectral;

pub use classify::{verdict, Outcome, Verdict};
pub use env::{CookieEnvironment, GwEnvironment, Mode};
pub use pmatrix::{ClassDecomposition, CookieMatrix};
pub use spectral::{lambda_max, ClassSpectrum};
