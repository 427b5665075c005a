//! Numerical laboratory for Perelman's λ-functional on discretized flat tori.
//!
//! - [`manifold`]: periodic grids, tensor fields, curvature and differential operators.
//! - [`spectral`]: the Schrödinger operator `−4Δ_g + R_g`, its ground state and resolvents.
//! - [`variation`]: first, second and third variations of λ and the gradient `Rc + Hess f`.
//! - [`decomp`]: gauge and transverse-traceless splittings at flat metrics.
//! - [`flow`]: Ricci–DeTurck flow with live inequality monitors.
//! - [`cli`]: configuration and command dispatch for the `lambda-lab` binary.

pub mod cli;
pub mod decomp;
pub mod error;
pub mod flow;
pub mod linalg;
pub mod manifold;
pub mod par;
pub mod sample;
pub mod scalar;
pub mod spectral;
pub mod variation;

pub use error::{LabError, Result};
