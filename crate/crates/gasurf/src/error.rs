//! Crate-wide error type.
//!
//! Errors are grouped by what the caller can do about them:
//!
//! * [`Error::Domain`] — the input state is outside the operation's domain
//!   (evaluating a potential beyond its blow-up point, requesting the
//!   physical velocity of an inadmissible state, a root bracket whose
//!   endpoints have the same sign, …).
//! * [`Error::Quadrature`], [`Error::OdeMaxSteps`], [`Error::NonConvergence`]
//!   — a numerical procedure failed to reach its tolerance; the variants
//!   carry the best estimate so callers can decide whether to retry with a
//!   looser spec or give up.
//! * [`Error::Degenerate`] — a formula's denominator vanished (zero inflow
//!   where a flux ratio is required, an identically-zero re-emission
//!   fraction, …).
//! * [`Error::Assembly`] — a discrete kernel column lost too many samples
//!   to be trusted.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the library proper (configuration and I/O errors
/// live in the CLI layer).
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature did not converge within the subdivision budget.
    /// `best` is the last estimate, `error_bound` the accumulated bound.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (best estimate {best:e}, error bound {error_bound:e})"
    )]
    Quadrature {
        best: f64,
        error_bound: f64,
        subdivisions: usize,
    },

    /// ODE tracing exceeded its step budget before the stop event fired.
    /// Carries the partial state reached and the model time so far.
    #[error("ODE trace exceeded {max_steps} steps at t = {t} before the stop event")]
    OdeMaxSteps {
        max_steps: usize,
        t: f64,
        partial_state: Vec<f64>,
    },

    /// An iterative solver stalled; `residual_history` holds the sup-norm
    /// residual of every iteration performed.
    #[error("iteration did not converge: residual {last:e} after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        last: f64,
        residual_history: Vec<f64>,
    },

    /// A flux ratio or normalization constant came out non-positive.
    #[error("degenerate denominator: {0}")]
    Degenerate(String),

    /// A kernel column discarded more samples than the configured budget.
    #[error(
        "kernel assembly failed for incoming cell {column}: \
         {discarded} of {total} samples discarded (limit {limit})"
    )]
    Assembly {
        column: usize,
        discarded: usize,
        total: usize,
        limit: usize,
    },
}
