//! Scalar abstraction for the dimensionless energies used throughout.
//!
//! The model and the pure-math kernels are generic over [`Scalar`] so they
//! can run at `f32` or `f64`; the solvers and samplers, whose tolerances
//! are pinned to double precision, use the concrete alias [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar for energies, couplings and weights.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from a literal.
    fn from_f64_lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Default scalar used by the solvers, the QMC engine and the CLI.
pub type Real = f64;
