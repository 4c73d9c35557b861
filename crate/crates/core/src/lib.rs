//! Numerical laboratory for spontaneous wave-function collapse models.
//!
//! The crate simulates GRW jump dynamics and continuous CSL dynamics for one
//! or two particles on a periodic 1D grid, evolves the matching ensemble
//! density matrix, estimates Diósi–Penrose collapse times for simple mass
//! distributions and turns interferometry visibilities into bounds on the
//! collapse rate.

// Range checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod csl;
pub mod dp;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod grw;
pub mod master;
pub mod propagator;
pub mod qstate;

mod spectral;

pub use error::{CollapseError, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Newton's constant, m³ kg⁻¹ s⁻².
pub const G_NEWTON: f64 = 6.674_30e-11;
/// Atomic mass unit, kg. Also the reference mass for mass-proportional couplings.
pub const AMU: f64 = 1.660_539_066_60e-27;
