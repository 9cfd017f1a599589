use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("image dimensions differ: {0}")]
    DimensionMismatch(String),

    #[error("image is {width}x{height}, smaller than the {window}x{window} window")]
    TooSmall {
        width: usize,
        height: usize,
        window: usize,
    },

    #[error("odd dimensions {width}x{height}; Bayer data needs even width and height")]
    OddDimensions { width: usize, height: usize },

    #[error("no bracket: target mass {target} not reachable in (0, {upper}]")]
    NoBracket { target: f64, upper: f64 },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Image(#[from] ::image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
