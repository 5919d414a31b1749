//! Joint learning of scalar input-kernel combinations and a PSD output
//! kernel for multivariate regression, with a sparse instance applied to
//! nonlinear Granger causal graph inference.
//!
//! The model class is a separable matrix-valued kernel `k_η(x, z)·L`:
//! `k_η` is a nonnegative combination of dictionary kernels and `L` is a
//! trace-bounded PSD matrix coupling the outputs. Fitting alternates a
//! conjugate-gradient Sylvester solve for the coefficients, a closed-form
//! kernel-weight update, and a Frank-Wolfe step over the spectahedron
//! for the output kernel.

pub mod driver;
pub mod error;
pub mod granger;
pub mod io;
pub mod kernels;
pub mod matrix;
pub mod output_kernel;
pub mod selftest;
pub mod sylvester;

pub use error::{Error, Result};
