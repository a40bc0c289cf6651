//! Dense tensors, CSR sparse matrices, neural layer primitives with manual
//! backpropagation, and a finite-difference gradient-check harness.
//!
//! All operations are pure functions of their inputs. Values are 64-bit in
//! test and gradient-check builds; 32-bit is supported for training speed.

pub mod gradcheck;
pub mod layers;
pub mod precision;
pub mod sparse;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use precision::{Precision, Scalar};
pub use tensor::{matmul, Tensor};
