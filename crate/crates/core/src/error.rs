use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix entry is not finite")]
    NonFiniteEntry,
    #[error("upper-triangular factor needs a strictly positive diagonal (t11={t11}, t22={t22})")]
    NonPositiveDiagonalEntry { t11: f64, t22: f64 },
    #[error("determinant {det} is not strictly positive")]
    NonPositiveDeterminant { det: f64 },
    #[error("first column is zero; QR factor undefined")]
    DegenerateColumn,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("noise has {got} driver columns, scenario needs {want}")]
    NoiseDimMismatch { got: usize, want: usize },
    #[error("noise covers {got} steps, grid has {want}")]
    NoiseLengthMismatch { got: usize, want: usize },
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("initial state does not match the scenario's state space")]
    WrongInitialState,
    #[error("planar scenario started at the origin")]
    OriginStart,
    #[error("matrix scenario start has det = {det} <= 0")]
    NonPositiveDeterminantStart { det: f64 },
    #[error("determinant crossed zero at step {step} (det = {det})")]
    DeterminantCrossedZero { step: usize, det: f64 },

    #[error("path hit the origin at sample {step}")]
    OriginHit { step: usize },
    #[error("angle changed by {delta} (>= pi) between samples {step} and {}", step + 1)]
    UnwrapJump { step: usize, delta: f64 },
    #[error("determinant {det} <= 0 at sample {step}")]
    NonPositiveDeterminantAt { step: usize, det: f64 },
    #[error("radial factor has t11 = {t11} <= 0 at sample {step}")]
    NonPositiveDiagonal { step: usize, t11: f64 },
    #[error("clock is flat over more than 10 steps starting at sample {step}")]
    FlatClock { step: usize },

    #[error("paths are not on the same grid")]
    GridMismatch,
    #[error("need at least {need} paths, got {got}")]
    TooFewPaths { got: usize, need: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_path(self, path: usize) -> Self {
        Error::Path {
            path,
            source: Box::new(self),
        }
    }
}
