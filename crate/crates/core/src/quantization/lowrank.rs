//! Low-rank key compression: truncated SVD factors stored as `f16`.

use half::f16;

use crate::error::{Error, Result};
use crate::numerics::{self, TensorF32};

use super::packed::PackedBits;
use super::{QuantizedBlock, SchemeDescriptor};

/// Views `x` as `[dims[0] × rest]`.
fn as_matrix(x: &TensorF32) -> Result<TensorF32> {
    if x.ndim() < 2 {
        return Err(Error::shape(format!("svd needs a matrix, got dims {:?}", x.dims())));
    }
    x.clone().reshape(vec![x.rows(), x.cols()])
}

/// Stores `left [rows × r]` then `right [r × cols]` as 16-bit floats.
pub fn svd_quantize(x: &TensorF32, rank: usize) -> Result<QuantizedBlock> {
    let m = as_matrix(x)?;
    let (rows, cols) = m.shape2()?;
    let f = numerics::truncated_svd(&m, rank)?;
    let mut codes = PackedBits::with_capacity(16 * rank * (rows + cols));
    for &v in f.left.data().iter().chain(f.right.data()) {
        codes.push(f16::from_f32(v).to_bits() as u64, 16);
    }
    Ok(QuantizedBlock {
        scheme: SchemeDescriptor::Svd { rank, rows, cols },
        codes,
        scales: TensorF32::vector(Vec::new())?,
        original_dims: x.dims().to_vec(),
    })
}

pub(super) fn dequantize(b: &QuantizedBlock, rank: usize, rows: usize, cols: usize) -> Result<Vec<f32>> {
    if rows * cols != b.value_count() {
        return Err(Error::CorruptBlock(format!(
            "svd factors bound to {rows}x{cols} but block holds {} values",
            b.value_count()
        )));
    }
    super::expect_layout(b, 16 * rank * (rows + cols), 0)?;
    let mut vals = b.codes.codes(16).map(|c| f16::from_bits(c as u16).to_f32());
    let left: Vec<f32> = vals.by_ref().take(rows * rank).collect();
    let right: Vec<f32> = vals.collect();
    if left.iter().chain(&right).any(|v| !v.is_finite()) {
        return Err(Error::CorruptBlock("non-finite svd factor".into()));
    }
    let prod = numerics::matmul(&TensorF32::matrix(rows, rank, left)?, &TensorF32::matrix(rank, cols, right)?)?;
    Ok(prod.into_data())
}
