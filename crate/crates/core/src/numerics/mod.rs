//! Minimal dense linear algebra over row-major `f32` tensors.
//!
//! Everything here is pure and deterministic: summation orders are fixed so a
//! given build produces bit-identical results run to run.

mod hadamard;
pub mod kvt;
mod linalg;
mod svd;
mod tensor;

pub(crate) use hadamard::inverse_randomized_hadamard_slice;
pub use hadamard::{
    fwht_normalized, inverse_randomized_hadamard, random_signs, randomized_hadamard, randomized_hadamard_slice,
};
pub use linalg::{dot, matmul, matmul_transposed, softmax_rows};
pub use svd::{truncated_svd, SvdFactors};
pub use tensor::TensorF32;
