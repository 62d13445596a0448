use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("map {index} has ratio {ratio}, expected a value in (0, 1)")]
    NonContractive { index: usize, ratio: f64 },
    #[error("bad probability vector: {0}")]
    BadProbabilities(String),
    #[error("orthogonal part of map {index} is not orthogonal (defect {defect:e})")]
    NotOrthogonal { index: usize, defect: f64 },
    #[error("images do not fit in the unit interval: total length {total} >= 1")]
    InfeasiblePacking { total: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("letter {letter} is not a valid map index (alphabet size {size})")]
    BadIndex { letter: u32, size: usize },
    #[error("operation requires dimension 1, model has dimension {0}")]
    UnsupportedDim(usize),
    #[error("operation requires orientation-preserving maps")]
    UnsupportedOrientation,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("models cannot be compared map by map: {0}")]
    IncomparableModels(String),
    #[error("eps must lie in (0, 1], got {0}")]
    BadEps(f64),
    #[error("n = {n} is not admissible: need n > 1/p_min^2 = {bound}")]
    NTooSmall { n: usize, bound: f64 },
    #[error("antichain expansion cannot terminate: {0}")]
    NonTerminating(String),
    #[error("sample {index} coincides with a codepoint; log-distance is -inf")]
    DegenerateSample { index: usize },
    #[error("tolerance {tol:e} not reached after {iterations} refinements (width {width:e})")]
    ToleranceUnreachable { tol: f64, iterations: usize, width: f64 },
    #[error("r = {0} is not supported here (need r >= 1)")]
    UnsupportedR(f64),
    #[error("empty codebook")]
    EmptyCodebook,
    #[error("regression ill-conditioned: {0}")]
    IllConditioned(String),
    #[error("model file: {0}")]
    ModelFile(String),
}

impl Error {
    /// Stable machine-readable tag, used by the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonContractive { .. } => "NonContractive",
            Error::BadProbabilities(_) => "BadProbabilities",
            Error::NotOrthogonal { .. } => "NotOrthogonal",
            Error::InfeasiblePacking { .. } => "InfeasiblePacking",
            Error::BadParameter(_) => "BadParameter",
            Error::BadIndex { .. } => "BadIndex",
            Error::UnsupportedDim(_) => "UnsupportedDim",
            Error::UnsupportedOrientation => "UnsupportedOrientation",
            Error::DimMismatch(..) => "DimMismatch",
            Error::IncomparableModels(_) => "IncomparableModels",
            Error::BadEps(_) => "BadEps",
            Error::NTooSmall { .. } => "NTooSmall",
            Error::NonTerminating(_) => "NonTerminating",
            Error::DegenerateSample { .. } => "DegenerateSample",
            Error::ToleranceUnreachable { .. } => "ToleranceUnreachable",
            Error::UnsupportedR(_) => "UnsupportedR",
            Error::EmptyCodebook => "EmptyCodebook",
            Error::IllConditioned(_) => "IllConditioned",
            Error::ModelFile(_) => "ModelFile",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
