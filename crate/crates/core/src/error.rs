//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by tensor I/O, quantization, and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure while reading or writing a tensor file.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// The file header could not be parsed as the OCTV format.
    #[error("malformed header: {reason}")]
    MalformedHeader { reason: String },

    /// The header declares a storage dtype this library does not know.
    #[error("unsupported dtype code {code}")]
    UnsupportedDtype { code: u8 },

    /// The declared shape contains a zero dimension, or the tensor holds no
    /// elements.
    #[error("empty tensor")]
    EmptyTensor,

    /// The payload holds fewer bytes than the header's shape requires.
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    /// Bytes remain after the declared payload.
    #[error("trailing data: {extra} extra bytes after payload")]
    TrailingData { extra: u64 },

    /// A loaded element is NaN or infinite.
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    /// The element count does not match the product of the shape.
    #[error("shape {shape:?} requires {expected} elements, got {actual}")]
    ShapeMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },

    /// A per-row grouping names an axis outside the tensor's rank.
    #[error("group axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },

    /// A group view was built for a different tensor shape.
    #[error("group view covers {view_len} elements, tensor has {tensor_len}")]
    ViewMismatch { view_len: usize, tensor_len: usize },

    /// Bit width outside the supported 2..=16 range.
    #[error("unsupported bit width {bits} (expected 2..=16)")]
    InvalidBits { bits: u32 },

    /// A clipping scalar that must be positive is zero or negative.
    #[error("non-positive scalar {value} for non-degenerate group {group}")]
    NonPositiveScalar { group: usize, value: f64 },

    /// Unsigned quantization was asked to process a negative value.
    #[error("unsigned quantization requires nonnegative data (negative value at index {index})")]
    NegativeUnsigned { index: usize },

    /// A scalar set's length does not match its group view.
    #[error("scalar set holds {scalars} scalars for {groups} groups")]
    ScalarCountMismatch { scalars: usize, groups: usize },

    /// The operation needs nonzero data but every element is zero.
    #[error("degenerate tensor: {context}")]
    Degenerate { context: String },

    /// A histogram or sweep parameter is unusable (zero bins, bad edges, ...).
    #[error("invalid parameter: {reason}")]
    InvalidParameter { reason: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
