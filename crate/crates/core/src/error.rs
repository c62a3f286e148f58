use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Element count overflows `usize` or an extent is zero.
    #[error("invalid size: {0}")]
    Size(String),
    #[error("index ({b}, {h}, {w}, {c}) out of bounds for shape {shape}")]
    Index {
        b: usize,
        h: usize,
        w: usize,
        c: usize,
        shape: String,
    },
    /// Incompatible shapes or pooling/layer parameters.
    #[error("parameter error: {0}")]
    Param(String),
    /// Bad labels or other malformed data values.
    #[error("data error: {0}")]
    Data(String),
}
