use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("waveform lookup out of range: offset {offset} outside [{min}, {max}]")]
    Lookup { offset: i64, min: i64, max: i64 },
    #[error("symbol {symbol} out of range for alphabet of size {cardinality}")]
    Symbol { symbol: usize, cardinality: usize },
    #[error("bit sequence of length {len} is not a multiple of the block size {block}")]
    BitLength { len: usize, block: usize },
    #[error("no Gray mapping for an alphabet of size {0}")]
    Unsupported(usize),
    #[error("singular matrix: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
