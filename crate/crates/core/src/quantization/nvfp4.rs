//! NVFP4: E2M1 values with one E4M3 micro-scale per block of 16.

use crate::error::{Error, Result};
use crate::numerics::TensorF32;

use super::fp8::{e4m3_decode, e4m3_encode};
use super::packed::PackedBits;
use super::{QuantizedBlock, SchemeDescriptor};

/// E2M1 magnitudes indexed by the low three code bits.
pub const E2M1_GRID: [f32; 8] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0];
pub const E2M1_MAX: f32 = 6.0;
const UNIT_SCALE_CODE: u8 = 0x38;

/// Nearest grid magnitude; ties go to the even index (even mantissa).
pub fn e2m1_encode(x: f32) -> u8 {
    let a = x.abs();
    let mut best = 0usize;
    let mut best_err = f32::INFINITY;
    for (i, &g) in E2M1_GRID.iter().enumerate() {
        let err = (a - g).abs();
        if err < best_err || (err == best_err && i % 2 == 0) {
            best = i;
            best_err = err;
        }
    }
    let sign = if x.is_sign_negative() { 0x8 } else { 0x0 };
    sign | best as u8
}

pub fn e2m1_decode(code: u8) -> f32 {
    let v = E2M1_GRID[(code & 7) as usize];
    if code & 0x8 != 0 {
        -v
    } else {
        v
    }
}

/// The final block is zero-padded; padding is stored and counted.
pub fn nvfp4_quantize(x: &TensorF32) -> Result<QuantizedBlock> {
    nvfp4_quantize_blocked(x, super::scheme::NVFP4_BLOCK)
}

pub(super) fn nvfp4_quantize_blocked(x: &TensorF32, block: usize) -> Result<QuantizedBlock> {
    if block == 0 {
        return Err(Error::invalid("nvfp4 block must be >= 1"));
    }
    let blocks = x.len().div_ceil(block);
    let mut codes = PackedBits::with_capacity(4 * blocks * block);
    let mut scales = Vec::with_capacity(blocks);
    let mut buf = vec![0.0f32; block];
    for b in 0..blocks {
        let start = b * block;
        let end = (start + block).min(x.len());
        buf.fill(0.0);
        buf[..end - start].copy_from_slice(&x.data()[start..end]);
        let max_abs = buf.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let mut scale_code = if max_abs > 0.0 { e4m3_encode(max_abs / E2M1_MAX) } else { UNIT_SCALE_CODE };
        if scale_code == 0 {
            scale_code = 1;
        }
        let scale = e4m3_decode(scale_code).expect("finite scale code");
        scales.push(scale);
        for &v in &buf {
            codes.push(e2m1_encode(v / scale) as u64, 4);
        }
    }
    Ok(QuantizedBlock {
        scheme: SchemeDescriptor::Nvfp4 { block_size: block },
        codes,
        scales: TensorF32::vector(scales)?,
        original_dims: x.dims().to_vec(),
    })
}

pub(super) fn dequantize(b: &QuantizedBlock, block: usize) -> Result<Vec<f32>> {
    let count = b.value_count();
    let blocks = count.div_ceil(block);
    super::expect_layout(b, 4 * blocks * block, blocks)?;
    for (i, &s) in b.scales.data().iter().enumerate() {
        if e4m3_decode(e4m3_encode(s)) != Some(s) || s <= 0.0 {
            return Err(Error::CorruptBlock(format!("block scale {i} ({s}) is not a positive E4M3 value")));
        }
    }
    Ok(b.codes
        .codes(4)
        .take(count)
        .enumerate()
        .map(|(i, c)| e2m1_decode(c as u8) * b.scales.data()[i / block])
        .collect())
}
