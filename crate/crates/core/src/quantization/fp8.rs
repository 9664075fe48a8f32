//! FP8 E4M3 (the "FN" variant: no infinities, max finite 448).

use crate::error::{Error, Result};
use crate::numerics::TensorF32;

use super::packed::PackedBits;
use super::{QuantizedBlock, SchemeDescriptor};

pub const E4M3_MAX: f32 = 448.0;
const MAX_CODE: u8 = 0x7E;
const MIN_NORMAL: f32 = 1.0 / 64.0;

/// Which values share an FP8 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleAxis {
    /// One scale for the whole tensor.
    Tensor,
    /// One scale per vector along the last dimension.
    LastDim,
    /// One scale per `n` consecutive values (the final block may be short).
    Block(usize),
}

/// Round-to-nearest-even, saturating at ±448. `-0.0` keeps its sign bit.
pub fn e4m3_encode(x: f32) -> u8 {
    let sign = if x.is_sign_negative() { 0x80 } else { 0x00 };
    let a = x.abs();
    if a >= E4M3_MAX {
        return sign | MAX_CODE;
    }
    let mag = if a < MIN_NORMAL {
        // Subnormals are multiples of 2^-9; a result of 8 carries into exponent 1.
        (a * 512.0).round_ties_even() as u8
    } else {
        let e = ((a.to_bits() >> 23) & 0xFF) as i32 - 127;
        let frac = a / 2f32.powi(e) - 1.0;
        let m = (frac * 8.0).round_ties_even() as i32;
        (((e + 7) << 3) + m) as u8
    };
    sign | mag.min(MAX_CODE)
}

/// Decodes an E4M3 byte. The two NaN encodings decode to `None`.
pub fn e4m3_decode(code: u8) -> Option<f32> {
    let mag = code & 0x7F;
    if mag == 0x7F {
        return None;
    }
    let exp = (mag >> 3) as i32;
    let m = (mag & 7) as f32;
    let v = if exp == 0 { m / 512.0 } else { (1.0 + m / 8.0) * 2f32.powi(exp - 7) };
    Some(if code & 0x80 != 0 { -v } else { v })
}

fn resolve_block(x: &TensorF32, axis: ScaleAxis) -> Result<usize> {
    let b = match axis {
        ScaleAxis::Tensor => x.len(),
        ScaleAxis::LastDim => x.dims().last().copied().unwrap_or(1),
        ScaleAxis::Block(n) => n,
    };
    if b == 0 {
        return Err(Error::invalid("fp8 scale block resolves to zero values"));
    }
    Ok(b)
}

/// Per-slice scale `max_abs / 448` (1.0 for an all-zero slice), values stored as E4M3 bytes.
pub fn fp8_e4m3_quantize(x: &TensorF32, axis: ScaleAxis) -> Result<QuantizedBlock> {
    let block = if x.is_empty() { 1 } else { resolve_block(x, axis)? };
    let mut codes = PackedBits::with_capacity(8 * x.len());
    let mut scales = Vec::with_capacity(x.len().div_ceil(block));
    for slice in x.data().chunks(block) {
        let max_abs = slice.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let scale = if max_abs > 0.0 { max_abs / E4M3_MAX } else { 1.0 };
        let scale = if scale > 0.0 { scale } else { f32::MIN_POSITIVE };
        scales.push(scale);
        for &v in slice {
            codes.push(e4m3_encode(v / scale) as u64, 8);
        }
    }
    Ok(QuantizedBlock {
        scheme: SchemeDescriptor::Fp8E4m3 { scale_block: block },
        codes,
        scales: TensorF32::vector(scales)?,
        original_dims: x.dims().to_vec(),
    })
}

pub(super) fn dequantize(b: &QuantizedBlock, block: usize) -> Result<Vec<f32>> {
    let count = b.value_count();
    super::expect_layout(b, 8 * count, count.div_ceil(block))?;
    let mut out = Vec::with_capacity(count);
    for (i, code) in b.codes.codes(8).enumerate() {
        let v = e4m3_decode(code as u8).ok_or_else(|| Error::CorruptBlock(format!("NaN code at value {i}")))?;
        out.push(v * b.scales.data()[i / block]);
    }
    Ok(out)
}
