//! Numerical solver and verification suite for the stationary incompressible
//! Navier-Stokes equations on R^n with a compactly supported force.
//!
//! The velocity is sought as a fixed point of the integral map
//! `u = U * (t f - (u . grad) u)` where `U` is the Stokes fundamental solution,
//! continued in `t` from 0 to 1. Convolutions are evaluated in free space with
//! zero-padded transforms of physically sampled kernels.

pub mod convolve;
pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod field;
pub mod forcing;
pub mod kernel;
pub mod lemma;
pub mod quadrature;
pub mod solver;

pub use convolve::{ConvolutionPlan, PlanOptions};
pub use error::{Error, Result};
pub use field::{GridSpec, ScalarField, TensorField, VectorField};
pub use kernel::{eval_kernel, KernelMatrix, StokesKernel};
pub use solver::{solve, SolveReport, SolverConfig};
