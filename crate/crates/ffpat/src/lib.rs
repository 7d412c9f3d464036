//! Full-field photoacoustic tomography at desk scale.
//!
//! The measured data in full-field PAT is the Radon transform of the
//! pressure field at a single final time, taken along lines that avoid the
//! object. This crate provides the matrix-free building blocks of that
//! model — a pseudospectral solver for the damped wave equation, a discrete
//! parallel-beam Radon transform with its exact transpose, harmonic
//! extension and time reversal — plus six regularized inversion algorithms
//! and an experiment harness that ties them together.
//!
//! Start with the runnable programs in `examples/`; each one demonstrates a
//! major capability end to end at a scale that finishes in seconds.

pub mod error;
pub mod field;
pub mod harmonic;
pub mod ops;
pub mod phantom;
pub mod radon;
pub mod spectral;
pub mod wave;

pub use error::{FfpatError, Result};
pub use field::{embed, rel_l2_error, restrict, Grid, Medium, ScalarField2D};
pub use ops::{compose, dot_test, power_iter_norm, LinearOperator, Space};
pub use phantom::{build_phantom, default_phantoms, Bump, BumpProfile, PhantomSpec, PhantomTarget};
