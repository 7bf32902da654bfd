//! Error types shared across the crate.

use crate::model::AugmentedState;

/// Errors raised by model construction, projection and learning routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter set violates a documented precondition. The message names
    /// the violated inequality.
    #[error("invalid parameters: {0}")]
    InvalidParams(alloc::string::String),

    /// The ray `(x - a, t, y + a)` never reaches the closure of the waiting
    /// region for any `a <= a_max`: the law is inadmissible at this state.
    #[error("no projection onto the waiting region from ({x}, {t}, {y}) within a_max = {a_max}",
        x = state.x, t = state.t, y = state.y)]
    NoProjection {
        /// State from which the projection was attempted.
        state: AugmentedState,
        /// Search cap that was exhausted.
        a_max: f64,
    },

    /// A sign change could not be bracketed during root finding. Carries the
    /// scanned interval for diagnostics.
    #[error("root not bracketed in [{lo}, {hi}]: {detail}")]
    RootNotBracketed {
        lo: f64,
        hi: f64,
        detail: &'static str,
    },

    /// A simulation or learning run produced a non-finite quantity. The
    /// payload reports where it happened; callers retain the last finite
    /// parameter vector.
    #[error("non-finite value encountered in episode {episode}, step {step}")]
    NonFinite { episode: u32, step: usize },

    /// A simulation configuration is inconsistent with the model horizon.
    #[error("simulation grid mismatch: t0 + n_steps * dt = {grid_end} but the horizon ends at {horizon_end}")]
    GridMismatch { grid_end: f64, horizon_end: f64 },

    /// A Monte Carlo path failed; carries the path index and the cause.
    #[error("path {path} failed: {source}")]
    PathFailed {
        path: usize,
        source: alloc::boxed::Box<Error>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
