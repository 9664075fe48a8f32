use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};

/// Exact bit counts.
pub type Bits = Ratio<u64>;

pub const DEFAULT_HADAMARD_SEED: u64 = 0x9E37_79B9;
pub const DEFAULT_CODEBOOK_SEED: u64 = 0x4849_4747;
pub const DEFAULT_HIGGS_GROUP: usize = 1024;
pub const DEFAULT_FP8_BLOCK: usize = 128;
pub const NVFP4_BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    None,
    Fp8E4m3,
    Nvfp4,
    Higgs,
    Svd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HiggsParams {
    /// Sub-vector dimension.
    pub d: usize,
    /// Codeword count.
    pub n: usize,
    /// Values sharing one Hadamard rotation and one 16-bit scale.
    pub group_size: usize,
    pub hadamard_seed: u64,
    pub codebook_seed: u64,
}

impl HiggsParams {
    /// The 4/2/1-bit grids: `d = 2` with 256, 16 and 4 codewords.
    pub fn with_bits(bits: u32) -> Result<Self> {
        let n = match bits {
            4 => 256,
            2 => 16,
            1 => 4,
            b => return Err(Error::invalid(format!("no default HIGGS grid for {b} bits"))),
        };
        Ok(Self {
            d: 2,
            n,
            group_size: DEFAULT_HIGGS_GROUP,
            hadamard_seed: DEFAULT_HADAMARD_SEED,
            codebook_seed: DEFAULT_CODEBOOK_SEED,
        })
    }

    pub fn index_bits(&self) -> u32 {
        self.n.trailing_zeros()
    }
}

/// How a tensor is (or is to be) compressed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum SchemeDescriptor {
    /// Values kept verbatim.
    #[default]
    None,
    /// E4M3 codes with one `f32` scale per `scale_block` consecutive values.
    Fp8E4m3 {
        scale_block: usize,
    },
    /// E2M1 codes with one E4M3 scale per `block_size` values.
    Nvfp4 {
        block_size: usize,
    },
    Higgs(HiggsParams),
    /// Rank-`rank` factors stored in 16 bits. `rows`/`cols` are 0 until bound to a matrix.
    Svd {
        rank: usize,
        rows: usize,
        cols: usize,
    },
}

impl SchemeDescriptor {
    pub fn fp8() -> Self {
        Self::Fp8E4m3 { scale_block: DEFAULT_FP8_BLOCK }
    }

    pub fn nvfp4() -> Self {
        Self::Nvfp4 { block_size: NVFP4_BLOCK }
    }

    pub fn higgs(bits: u32) -> Result<Self> {
        HiggsParams::with_bits(bits).map(Self::Higgs)
    }

    pub fn svd(rank: usize) -> Self {
        Self::Svd { rank, rows: 0, cols: 0 }
    }

    pub fn kind(&self) -> SchemeKind {
        match self {
            Self::None => SchemeKind::None,
            Self::Fp8E4m3 { .. } => SchemeKind::Fp8E4m3,
            Self::Nvfp4 { .. } => SchemeKind::Nvfp4,
            Self::Higgs(_) => SchemeKind::Higgs,
            Self::Svd { .. } => SchemeKind::Svd,
        }
    }

    pub fn is_lossless(&self) -> bool {
        matches!(self, Self::None)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::None => Ok(()),
            Self::Fp8E4m3 { scale_block: 0 } => Err(Error::invalid("fp8 block must be >= 1")),
            Self::Nvfp4 { block_size: 0 } => Err(Error::invalid("nvfp4 block must be >= 1")),
            Self::Fp8E4m3 { .. } | Self::Nvfp4 { .. } => Ok(()),
            Self::Higgs(p) => {
                if ![1, 2, 4].contains(&p.d) {
                    return Err(Error::invalid(format!("higgs d={} not in {{1,2,4}}", p.d)));
                }
                if p.n < 2 || !p.n.is_power_of_two() {
                    return Err(Error::invalid(format!("higgs n={} is not a power of two >= 2", p.n)));
                }
                if !p.group_size.is_power_of_two() || p.group_size < p.d {
                    return Err(Error::invalid(format!("higgs group {} must be a power of two >= d", p.group_size)));
                }
                Ok(())
            }
            Self::Svd { rank: 0, .. } => Err(Error::invalid("svd rank must be >= 1")),
            Self::Svd { .. } => Ok(()),
        }
    }

    /// Exact amortized storage cost per value, scales and factors included.
    pub fn bits_per_value(&self) -> Result<Bits> {
        self.validate()?;
        Ok(match *self {
            Self::None => Bits::from_integer(32),
            Self::Fp8E4m3 { scale_block } => Bits::from_integer(8) + Bits::new(32, scale_block as u64),
            Self::Nvfp4 { block_size } => Bits::from_integer(4) + Bits::new(8, block_size as u64),
            Self::Higgs(p) => Bits::new(p.index_bits() as u64, p.d as u64) + Bits::new(16, p.group_size as u64),
            Self::Svd { rank, rows, cols } => {
                if rows == 0 || cols == 0 {
                    return Err(Error::invalid("svd scheme not bound to matrix dims"));
                }
                Bits::new(16 * (rank * (rows + cols)) as u64, (rows * cols) as u64)
            }
        })
    }

    /// Nominal code width per value, excluding scale overhead.
    ///
    /// This is the cost model for fast-tier memory: lossless landmarks count as
    /// 16-bit, and HIGGS as `log2(n)/d`.
    pub fn code_bits(&self) -> Bits {
        match *self {
            Self::None => Bits::from_integer(16),
            Self::Fp8E4m3 { .. } => Bits::from_integer(8),
            Self::Nvfp4 { .. } => Bits::from_integer(4),
            Self::Higgs(p) => Bits::new(p.index_bits() as u64, p.d as u64),
            Self::Svd { rank, cols, .. } if cols > 0 => Bits::new(16 * rank as u64, cols as u64),
            Self::Svd { .. } => Bits::from_integer(16),
        }
    }

    /// Bits charged per entry of a block's `scales` tensor.
    pub fn scale_bits(&self) -> u64 {
        match self {
            Self::Fp8E4m3 { .. } => 32,
            Self::Nvfp4 { .. } => 8,
            Self::Higgs(_) => 16,
            Self::None | Self::Svd { .. } => 0,
        }
    }
}

/// Fast-tier bits per key coordinate: `landmark / chunk_size + residual`.
pub fn bits_per_key(
    landmark: &SchemeDescriptor,
    chunk_size: usize,
    residual: Option<&SchemeDescriptor>,
) -> Result<Bits> {
    if chunk_size == 0 {
        return Err(Error::invalid("chunk_size must be >= 1"));
    }
    let mut bits = landmark.code_bits() / Bits::from_integer(chunk_size as u64);
    if let Some(r) = residual {
        bits += r.code_bits();
    }
    Ok(bits)
}

pub fn bits_to_f64(b: Bits) -> f64 {
    *b.numer() as f64 / *b.denom() as f64
}

impl fmt::Display for SchemeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => write!(f, "none"),
            Self::Fp8E4m3 { scale_block } => write!(f, "fp8:block={scale_block}"),
            Self::Nvfp4 { block_size } => write!(f, "nvfp4:block={block_size}"),
            Self::Higgs(p) => write!(
                f,
                "higgs:d={},n={},group={},seed={},codebook_seed={}",
                p.d, p.n, p.group_size, p.hadamard_seed, p.codebook_seed
            ),
            Self::Svd { rank, rows: 0, cols: 0 } => write!(f, "svd:rank={rank}"),
            Self::Svd { rank, rows, cols } => write!(f, "svd:rank={rank},rows={rows},cols={cols}"),
        }
    }
}

impl FromStr for SchemeDescriptor {
    type Err = Error;

    /// Accepts the `Display` form plus the aliases `bf16`, `lossless`,
    /// `higgs4`, `higgs2`, `higgs1`, `fp8`, `nvfp4`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h.trim().to_ascii_lowercase(), parse_args(a)?),
            None => (s.to_ascii_lowercase(), Vec::new()),
        };
        let get = |key: &str| args.iter().find(|(k, _)| k == key).map(|(_, v)| *v);
        let scheme = match head.as_str() {
            "none" | "bf16" | "lossless" | "16bit" => Self::None,
            "fp8" | "fp8_e4m3" | "e4m3" => {
                Self::Fp8E4m3 { scale_block: get("block").map_or(Ok(DEFAULT_FP8_BLOCK), parse_num)? }
            }
            "nvfp4" => Self::Nvfp4 { block_size: get("block").map_or(Ok(NVFP4_BLOCK), parse_num)? },
            "higgs4" | "higgs2" | "higgs1" => {
                let bits = head[5..].parse().expect("digit");
                let mut p = HiggsParams::with_bits(bits)?;
                apply_higgs_args(&mut p, &get)?;
                Self::Higgs(p)
            }
            "higgs" => {
                let mut p = HiggsParams::with_bits(4)?;
                apply_higgs_args(&mut p, &get)?;
                Self::Higgs(p)
            }
            "svd" => Self::Svd {
                rank: get("rank").ok_or_else(|| Error::invalid("svd needs rank=")).and_then(parse_num)?,
                rows: get("rows").map_or(Ok(0), parse_num)?,
                cols: get("cols").map_or(Ok(0), parse_num)?,
            },
            other => return Err(Error::invalid(format!("unknown scheme `{other}`"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

fn apply_higgs_args<'a>(p: &mut HiggsParams, get: &impl Fn(&str) -> Option<&'a str>) -> Result<()> {
    if let Some(v) = get("d") {
        p.d = parse_num(v)?;
    }
    if let Some(v) = get("n") {
        p.n = parse_num(v)?;
    }
    if let Some(v) = get("group") {
        p.group_size = parse_num(v)?;
    }
    if let Some(v) = get("seed") {
        p.hadamard_seed = parse_num(v)?;
    }
    if let Some(v) = get("codebook_seed") {
        p.codebook_seed = parse_num(v)?;
    }
    Ok(())
}

fn parse_args(s: &str) -> Result<Vec<(String, &str)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim()))
                .ok_or_else(|| Error::invalid(format!("scheme argument `{p}` is not key=value")))
        })
        .collect()
}

fn parse_num<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::invalid(format!("`{s}` is not a valid number")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: u64, d: u64) -> Bits {
        Bits::new(n, d)
    }

    #[test]
    fn nvfp4_is_four_and_a_half_bits() {
        assert_eq!(SchemeDescriptor::nvfp4().bits_per_value().unwrap(), r(9, 2));
    }

    #[test]
    fn higgs_4bit_group_1024() {
        let b = SchemeDescriptor::higgs(4).unwrap().bits_per_value().unwrap();
        assert_eq!(b, r(4, 1) + r(1, 64));
        assert!((bits_to_f64(b) - 4.02).abs() < 0.02);
    }

    #[test]
    fn fp8_and_svd_accounting() {
        let fp8 = SchemeDescriptor::fp8().bits_per_value().unwrap();
        assert_eq!(fp8, r(33, 4));
        let svd = SchemeDescriptor::Svd { rank: 160, rows: 4096, cols: 1024 };
        assert_eq!(svd.bits_per_value().unwrap(), r(25, 8));
        let svd512 = SchemeDescriptor::Svd { rank: 512, rows: 4096, cols: 1024 };
        assert!(svd512.bits_per_value().unwrap() > fp8);
        assert!(SchemeDescriptor::svd(4).bits_per_value().is_err());
    }

    #[test]
    fn equal_memory_triple() {
        let none = SchemeDescriptor::None;
        let h4 = SchemeDescriptor::higgs(4).unwrap();
        let h2 = SchemeDescriptor::higgs(2).unwrap();
        assert_eq!(bits_per_key(&none, 8, None).unwrap(), r(2, 1));
        assert_eq!(bits_per_key(&h4, 2, None).unwrap(), r(2, 1));
        assert_eq!(bits_per_key(&h2, 1, None).unwrap(), r(2, 1));
    }

    #[test]
    fn residual_config_is_one_and_a_half() {
        let h4 = SchemeDescriptor::higgs(4).unwrap();
        let h1 = SchemeDescriptor::higgs(1).unwrap();
        assert_eq!(bits_per_key(&h4, 8, Some(&h1)).unwrap(), r(3, 2));
        assert!(bits_per_key(&h4, 0, None).is_err());
    }

    #[test]
    fn parse_and_display() {
        for s in ["none", "fp8:block=64", "nvfp4:block=16", "svd:rank=160", "svd:rank=8,rows=16,cols=32"] {
            let d: SchemeDescriptor = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        let h: SchemeDescriptor = "higgs2".parse().unwrap();
        assert_eq!(h.to_string().parse::<SchemeDescriptor>().unwrap(), h);
        let custom: SchemeDescriptor = "higgs:d=1,n=2,group=64,seed=3".parse().unwrap();
        assert!(
            matches!(custom, SchemeDescriptor::Higgs(p) if p.d == 1 && p.n == 2 && p.group_size == 64 && p.hadamard_seed == 3)
        );
        assert_eq!("bf16".parse::<SchemeDescriptor>().unwrap(), SchemeDescriptor::None);
        assert!("higgs:n=3".parse::<SchemeDescriptor>().is_err());
        assert!("zstd".parse::<SchemeDescriptor>().is_err());
        assert!("svd".parse::<SchemeDescriptor>().is_err());
    }
}
