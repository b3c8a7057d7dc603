//! Spectral-Galerkin simulator and verification harness for a relaxed
//! Cahn--Hilliard-type tumor-growth system driven by fractional powers of
//! three independent self-adjoint operators.
//!
//! The crate is organized around five pieces:
//!
//! - [`spectral`]: eigenbases, fractional powers, resolvents, and the norm
//!   zoo (graph, dual, seminorm) in an N-mode truncation;
//! - [`potential`]: the split double-well potentials with their
//!   Moreau--Yosida regularizations and the proliferation function;
//! - [`scheme`]: the implicit Euler stepper with a Newton inner solve for
//!   the coupled three-field system at any relaxation pair
//!   `(alpha, beta) in [0,1]^2`, plus per-trajectory diagnostic reports;
//! - [`asymptotics`]: relaxation-limit sweeps, the two-trajectory stability
//!   inequality, and uniqueness probes;
//! - [`config`] / [`report`] / [`cli`]: JSON configuration, deterministic
//!   CSV/JSON serialization, and the `fracgrow` command-line front end.

// validation guards are written as `!(x > 0.0)` on purpose: NaN must fail
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod config;
pub mod error;
pub mod potential;
pub mod report;
pub mod scheme;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
