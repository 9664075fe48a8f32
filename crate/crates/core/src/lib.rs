//! A desk-scale laboratory for KV-cache offloading policies.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense tensors, matmul, stable softmax, truncated SVD, the
//!   seeded randomized Hadamard transform and the `KVT1` tensor file format.
//! - [`quantization`]: software FP8 E4M3, NVFP4 and HIGGS quantizers, low-rank
//!   key compression and exact bit accounting.
//! - [`kvstore`]: the chunked, tiered KV store (landmarks, residual landmarks,
//!   outlier chunks, local window, slow-tier traffic).
//! - [`selection`]: landmark ranking, exact oracle selection and the
//!   residual-refined approximate top-k.
//! - [`attention`]: exact full attention and sparse attention over a selection.
//! - [`workload`]: planted multi-needle workloads and tensor import.
//! - [`text2json`]: structured-extraction instance generator and soft-IoU scorer.
//! - [`harness`]: experiment configuration, sweeps and CSV/plot emission.

pub mod attention;
pub mod error;
pub mod harness;
pub mod kvstore;
pub mod numerics;
pub mod quantization;
pub mod selection;
pub mod text2json;
pub mod workload;

pub use error::{Error, Result};
pub use numerics::TensorF32;
