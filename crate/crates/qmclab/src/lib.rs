//! Escape-rate laboratory for transverse-field Ising double wells.
//!
//! The crate measures when local-update worldline quantum Monte Carlo
//! tracks incoherent quantum tunneling (escape rate ∝ g²) and when
//! multiple tunneling paths give tunneling an advantage. It provides:
//!
//! - [`model`]: Ising problem definitions and benchmark instance families
//!   (uniform ferromagnet, frustrated ring, shamrock);
//! - [`exactdiag`]: dense and matrix-free spectral solvers used as the
//!   ground-truth oracle for the tunneling amplitude g;
//! - [`perturbation`]: tunneling-path enumeration, divided-difference loop
//!   free energies, and the all-orders two-level resolvent reduction;
//! - [`ctqmc`]: continuous-time worldline Monte Carlo with detailed-balance
//!   local updates, escape-time and round-trip estimators;
//! - [`harness`]: experiment configuration, statistics and CSV reporting.

pub mod ctqmc;
pub mod error;
pub mod exactdiag;
pub mod harness;
pub mod model;
pub mod perturbation;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};
