//! Software quantizers with exact bit accounting.
//!
//! Every scheme produces a self-describing [`QuantizedBlock`]; [`dequantize`]
//! needs nothing but the block. HIGGS blocks name their codebook by
//! `(d, n, seed)` and rebuild it through the process-wide cache.

mod fp8;
mod higgs;
mod lowrank;
mod nvfp4;
mod packed;
mod scheme;

pub use fp8::{e4m3_decode, e4m3_encode, fp8_e4m3_quantize, ScaleAxis, E4M3_MAX};
pub use higgs::{build_higgs_codebook, cached_codebook, higgs_quantize, HiggsCodebook, KMEANS_SAMPLES};
pub use lowrank::svd_quantize;
pub use nvfp4::{e2m1_decode, e2m1_encode, nvfp4_quantize, E2M1_GRID};
pub use packed::PackedBits;
pub use scheme::{
    bits_per_key, bits_to_f64, Bits, HiggsParams, SchemeDescriptor, SchemeKind, DEFAULT_CODEBOOK_SEED,
    DEFAULT_FP8_BLOCK, DEFAULT_HADAMARD_SEED, DEFAULT_HIGGS_GROUP, NVFP4_BLOCK,
};

use crate::error::{Error, Result};
use crate::numerics::{kvt, TensorF32};

/// Codes, scales and the scheme that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBlock {
    pub scheme: SchemeDescriptor,
    pub codes: PackedBits,
    pub scales: TensorF32,
    pub original_dims: Vec<usize>,
}

impl QuantizedBlock {
    pub fn value_count(&self) -> usize {
        self.original_dims.iter().product()
    }

    /// Code bits plus scale bits actually held by the block.
    pub fn stored_bits(&self) -> u64 {
        self.codes.len() as u64 + self.scales.len() as u64 * self.scheme.scale_bits()
    }
}

pub(crate) fn expect_layout(b: &QuantizedBlock, code_bits: usize, n_scales: usize) -> Result<()> {
    if b.codes.len() != code_bits {
        return Err(Error::CorruptBlock(format!(
            "{}: expected {code_bits} code bits, found {}",
            b.scheme,
            b.codes.len()
        )));
    }
    if b.scales.len() != n_scales {
        return Err(Error::CorruptBlock(format!("{}: expected {n_scales} scales, found {}", b.scheme, b.scales.len())));
    }
    Ok(())
}

/// Quantizes `x` with `scheme`. SVD blocks are bound to `x`'s matrix shape.
pub fn quantize(x: &TensorF32, scheme: &SchemeDescriptor) -> Result<QuantizedBlock> {
    scheme.validate()?;
    match *scheme {
        SchemeDescriptor::None => {
            let mut codes = PackedBits::with_capacity(32 * x.len());
            for &v in x.data() {
                codes.push(v.to_bits() as u64, 32);
            }
            Ok(QuantizedBlock {
                scheme: SchemeDescriptor::None,
                codes,
                scales: TensorF32::vector(Vec::new())?,
                original_dims: x.dims().to_vec(),
            })
        }
        SchemeDescriptor::Fp8E4m3 { scale_block } => fp8_e4m3_quantize(x, ScaleAxis::Block(scale_block)),
        SchemeDescriptor::Nvfp4 { block_size } => nvfp4::nvfp4_quantize_blocked(x, block_size),
        SchemeDescriptor::Higgs(p) => {
            let cb = cached_codebook(p.d, p.n, p.codebook_seed)?;
            higgs_quantize(x, &cb, p.group_size, p.hadamard_seed)
        }
        SchemeDescriptor::Svd { rank, .. } => svd_quantize(x, rank),
    }
}

pub fn dequantize(b: &QuantizedBlock) -> Result<TensorF32> {
    let count = b.value_count();
    let data = match b.scheme {
        SchemeDescriptor::None => {
            expect_layout(b, 32 * count, 0)?;
            let data: Vec<f32> = b.codes.codes(32).map(|c| f32::from_bits(c as u32)).collect();
            if let Some(i) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::CorruptBlock(format!("non-finite verbatim value at {i}")));
            }
            data
        }
        SchemeDescriptor::Fp8E4m3 { scale_block } => fp8::dequantize(b, scale_block.max(1))?,
        SchemeDescriptor::Nvfp4 { block_size } => nvfp4::dequantize(b, block_size.max(1))?,
        SchemeDescriptor::Higgs(p) => {
            b.scheme.validate()?;
            higgs::dequantize(b, &p)?
        }
        SchemeDescriptor::Svd { rank, rows, cols } => lowrank::dequantize(b, rank, rows, cols)?,
    };
    TensorF32::new(b.original_dims.clone(), data)
}

/// `dequantize(quantize(x))`. Lossless schemes return `x` unchanged.
pub fn roundtrip(x: &TensorF32, scheme: &SchemeDescriptor) -> Result<TensorF32> {
    if scheme.is_lossless() {
        scheme.validate()?;
        return Ok(x.clone());
    }
    dequantize(&quantize(x, scheme)?)
}

/// Writes `codebook.kvt` and a `codebook.txt` sidecar holding `d n seed`.
pub fn export_codebook(cb: &HiggsCodebook, dir: impl AsRef<std::path::Path>) -> Result<()> {
    let dir = dir.as_ref();
    kvt::write(dir.join("codebook.kvt"), &cb.codewords)?;
    let side = dir.join("codebook.txt");
    std::fs::write(&side, format!("d={} n={} seed={}\n", cb.d, cb.n, cb.seed)).map_err(Error::at_path(&side))
}

pub fn import_codebook(dir: impl AsRef<std::path::Path>) -> Result<HiggsCodebook> {
    let dir = dir.as_ref();
    let side = dir.join("codebook.txt");
    let header = std::fs::read_to_string(&side).map_err(Error::at_path(&side))?;
    let mut fields = [None; 3];
    for tok in header.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| Error::invalid(format!("bad codebook header `{tok}`")))?;
        let v: u64 = v.parse().map_err(|_| Error::invalid(format!("bad codebook header `{tok}`")))?;
        match k {
            "d" => fields[0] = Some(v),
            "n" => fields[1] = Some(v),
            "seed" => fields[2] = Some(v),
            _ => return Err(Error::invalid(format!("unknown codebook header key `{k}`"))),
        }
    }
    let [Some(d), Some(n), Some(seed)] = fields else {
        return Err(Error::invalid("codebook header needs d, n and seed"));
    };
    let cb = HiggsCodebook::from_codewords(d as usize, seed, kvt::read(dir.join("codebook.kvt"))?)?;
    if cb.n != n as usize {
        return Err(Error::shape(format!("header says n={n}, file holds {} codewords", cb.n)));
    }
    Ok(cb)
}
