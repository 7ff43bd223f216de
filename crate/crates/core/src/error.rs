use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rim annulus spans {rim_arc_m:.4} m of surface arc, less than one element side of {side_m:.4} m")]
    NoRimElements { rim_arc_m: f64, side_m: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("element field vector has zero norm")]
    ZeroFieldVector,

    #[error("constraint rows {rows:?} are linearly dependent on the preceding rows")]
    RankDeficient { rows: Vec<usize> },

    #[error("angle list is empty")]
    EmptyAngles,

    #[error("alphabet mismatch: {left} vs {right} phase levels")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
