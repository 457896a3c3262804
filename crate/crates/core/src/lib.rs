//! Numerical core for ground states of the mass-critical fractional NLS
//! equation and minimizers of the associated constrained energy.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod coefficients;
pub mod error;
pub mod grid;
pub mod ground_state;
pub mod io;
pub mod minimizer;
pub mod spectral;

pub use error::{FlepError, Result};
pub use grid::{Field, Grid, Point};
pub use spectral::{
    apply_fractional_laplacian, dirichlet_energy, resolvent_apply, FractionalLaplacian,
    FractionalOrder, Spectral,
};
