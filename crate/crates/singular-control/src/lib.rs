//! Numerical toolkit for one-dimensional singular stochastic control.
//!
//! The state `X` follows a controlled diffusion `dX = mu dt + sigma dB - d(xi)`
//! where the control `xi` is nondecreasing and cadlag. A *control law* splits
//! the augmented space `(x, t, y)` (state, time, accumulated control) into an
//! open waiting region and its closed action complement; the control is the
//! minimal push keeping the state in the closure of the waiting region
//! (Skorohod reflection).
//!
//! The crate provides:
//!
//! - [`model`]: problem data (drift, volatility, running/control/terminal
//!   costs, discounting, horizon) plus the exponential-cost benchmark with
//!   constant coefficients.
//! - [`law`]: threshold and sign-region control laws with the ray projection
//!   that generates the singular control.
//! - [`sim`]: project-after-Euler simulation of the reflected pair, trajectory
//!   recording and Monte Carlo valuation with common random numbers.
//! - [`oracle`]: closed-form value function, q-functions, free boundary and
//!   boundary-iteration map for the benchmark model, used as ground truth.
//! - [`learn`]: martingale-increment machinery, offline martingale-loss and
//!   online TD(0) parameter updates, and episode-level training loops.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded or sandboxed use.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod law;
pub mod learn;
mod math;
pub mod model;
pub mod oracle;
pub mod sim;

pub use error::Error;
pub use law::{ControlLaw, Region};
pub use model::{AugmentedState, ExpCostParams, Horizon, ModelSpec};
pub use oracle::ClosedFormSolution;
pub use sim::{SimConfig, StepRecord, Trajectory};
