use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid value in tensor `{name}` at element {index}: {value}")]
    InvalidValue {
        name: String,
        index: usize,
        value: f64,
    },

    #[error("duplicate tensor name `{0}`")]
    DuplicateName(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("index ({n}, {c}, {h}, {w}) out of range for shape {shape}")]
    IndexOutOfRange {
        n: usize,
        c: usize,
        h: usize,
        w: usize,
        shape: String,
    },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid clip bounds: lo {lo} > hi {hi}")]
    InvalidBounds { lo: f64, hi: f64 },

    #[error("degenerate clip range [{beta}, {alpha}]")]
    DegenerateRange { beta: f64, alpha: f64 },

    #[error("bit width {0} is outside the supported range [2, 8]")]
    InvalidBits(u8),

    #[error("code {code} is outside the domain [{lo}, {hi}]")]
    CodeOutOfDomain { code: i32, lo: i32, hi: i32 },

    #[error("empty slice")]
    EmptySlice,

    #[error("slice is all zeros")]
    AllZeroSlice,

    #[error("tail bound m must be positive, got {0}")]
    NonPositiveM(f64),

    #[error("breakpoint {p} must lie strictly inside (0, {m})")]
    BreakpointOutOfRange { p: f64, m: f64 },

    #[error("piece-wise linear quantization needs at least 3 bits, got {0}")]
    BitsTooSmall(u8),

    #[error("grid needs at least 3 points, got {0}")]
    GridTooSmall(usize),

    #[error("incompatible bit width {bits} for method {method}")]
    IncompatibleBits { method: String, bits: u8 },

    #[error("corrupt codes in tensor `{name}` at element {index}: {reason}")]
    CorruptCodes {
        name: String,
        index: usize,
        reason: String,
    },

    #[error("no viable granularity candidate")]
    NoViableCandidate,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("truncated data: need {needed} bytes, have {available}")]
    TruncatedData { needed: usize, available: usize },

    #[error("corrupt container header: {0}")]
    CorruptHeader(String),

    #[error("unsupported container version `{0}`")]
    VersionMismatch(String),

    #[error("section `{section}` of tensor `{name}` lies outside the payload")]
    OffsetOutOfBounds { name: String, section: String },

    #[error("parameter of tensor `{name}` not representable in storage precision: {reason}")]
    NotRepresentable { name: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
