//! Discrete-time least-squares adaptive state tracking control, with a
//! multi-robot simulator and potential-field collision avoidance.
//!
//! The library is organized around the adaptive control loop:
//!
//! - [`system_models`]: LTI plant and reference-model state machines and
//!   the matching-gain machinery.
//! - [`regressor`]: the `W_m(z)` filter bank producing the auxiliary
//!   signals and the estimation error `ε = μ + Zᵀθ`.
//! - [`adaptation`]: the least-squares law with covariance recursion and
//!   its batch oracle, parameter projection, the normalized-gradient
//!   baseline, state estimator, and control law.
//! - [`collision`]: repulsive potential fields, energy budgets, and the
//!   `α` blending coefficient.
//! - [`sim`]: the fixed-step closed-loop engine, traces, metrics, and
//!   paired comparisons.
//! - [`config`]: TOML scenario documents and named presets.
//! - [`trace_io`]: CSV trace and JSON metrics emission.

// validations use `!(x > 0.0)` so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptation;
pub mod collision;
pub mod config;
pub mod error;
pub mod regressor;
pub mod sim;
pub mod system_models;
pub mod trace_io;

pub use error::{Error, Result};
