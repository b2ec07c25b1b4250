//! Exact-verification toolkit for the six-vertex model.
//!
//! The crate builds the standard operator content of the algebraic Bethe
//! Ansatz — R/S matrices, monodromy and transfer matrices for a periodic
//! chain, Sklyanin double-row operators for a chain with diagonal
//! reflecting ends — entirely as dense complex matrices at desk scale
//! (`L ≲ 8` sites), and cross-checks every closed formula against those
//! dense operators.  No eigensolver is used anywhere: every claim is
//! phrased as the residual of an explicit identity.
//!
//! Modules:
//!
//! * [`dense`] — minimal dense complex linear algebra (Kronecker products,
//!   partial trace over the auxiliary factor, residual norms).
//! * [`weights`] — vertex-weight parameterizations, R/S/P matrices, the
//!   anisotropy invariant, Yang-Baxter residuals, commutation coefficients.
//! * [`periodic`] — monodromy blocks, transfer matrix, Bethe states,
//!   partition-function checks for the periodic chain.
//! * [`boundary`] — K-matrices, reflection equations, double-row operators,
//!   boundary vacuum values and commutation coefficients.
//! * [`trees`] — pruned binary/ternary path enumeration reproducing the
//!   transfer-matrix action, eigenvalue and Bethe-coefficient extraction,
//!   identity suites, DOT export.
//! * [`solver`] — multistart damped-Newton solution of the Bethe equations
//!   with end-to-end dense eigenpair verification.
//! * [`sampling`] — deterministic seeded parameter sampling shared by the
//!   CLI and the test suites.

pub mod boundary;
pub mod dense;
pub mod periodic;
pub mod sampling;
pub mod solver;
pub mod trees;
pub mod weights;

use num_complex::Complex64;

/// Tolerances and caps used across the crate.
///
/// These are deliberately centralized: each constant appears exactly once so
/// that a verification failure can always be traced to a single knob.
pub mod tol {
    /// Denominator magnitudes below this value raise
    /// [`Error::PoleProximity`](crate::Error::PoleProximity).  Conservative
    /// for double precision: all verified formulas are rational in the
    /// amplitudes, and denominators this small void any digit guarantee.
    pub const POLE_GUARD: f64 = 1e-12;

    /// Default relative tolerance for identity verification.  All desk-scale
    /// matrices here are at most 2^9-dimensional and well-conditioned over
    /// the sampled parameter ranges, so 1e-9 leaves a wide margin over
    /// accumulated rounding error while still catching any wrong term.
    pub const DEFAULT_VERIFY: f64 = 1e-9;

    /// States with norm below this are reported as numerically zero
    /// (see [`Error::ZeroState`](crate::Error::ZeroState)).  Products of
    /// creation operators annihilate once the flip budget of the chain is
    /// exhausted; this threshold separates that structural zero from small
    /// but genuine amplitudes.
    pub const ZERO_STATE_NORM: f64 = 1e-14;

    /// Matrix dimensions may not exceed this cap (2^14).  Keeps accidental
    /// large-`L` requests from exhausting memory; every supported check fits
    /// comfortably below it.
    pub const DIMENSION_CAP: usize = 1 << 14;

    /// Path enumerations may not exceed this many codes (3^12).
    pub const ENUMERATION_CAP: usize = 531_441;
}

/// Errors shared by all modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A constructed operator would exceed [`tol::DIMENSION_CAP`].
    #[error("matrix dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    /// Operand shapes are incompatible with the requested operation.
    #[error("shape mismatch in {op}: left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeError {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    /// A denominator fell below the pole guard; the result would be
    /// numerically meaningless.
    #[error("denominator magnitude {magnitude:.3e} below pole guard {guard:.3e} while evaluating {context}")]
    PoleProximity {
        context: &'static str,
        magnitude: f64,
        guard: f64,
    },

    /// A path enumeration would exceed [`tol::ENUMERATION_CAP`].
    #[error("enumeration of {size} paths exceeds the cap {cap}")]
    EnumerationCap { size: usize, cap: usize },

    /// A state vector collapsed below [`tol::ZERO_STATE_NORM`]; downstream
    /// normalization is impossible.  Surfaced as a warning where the zero
    /// state itself is the object under test.
    #[error("state norm {norm:.3e} below the zero-state threshold")]
    ZeroState { norm: f64 },

    /// No Newton start reached the convergence tolerance.
    #[error("no converged solution from {starts} Newton starts")]
    NoConvergence { starts: usize },

    /// Two rapidities of a candidate solution collided within the pole
    /// guard, so the commutation coefficients are undefined there.
    #[error("rapidities {first} and {second} collide within separation guard {guard:.3e}")]
    DegenerateRoots {
        first: usize,
        second: usize,
        guard: f64,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Checks a denominator against the pole guard before dividing.
pub(crate) fn guard_denominator(value: Complex64, context: &'static str) -> Result<Complex64> {
    if value.norm() < tol::POLE_GUARD {
        Err(Error::PoleProximity {
            context,
            magnitude: value.norm(),
            guard: tol::POLE_GUARD,
        })
    } else {
        Ok(value)
    }
}
