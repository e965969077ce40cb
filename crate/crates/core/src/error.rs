use thiserror::Error;

use crate::extraction::FitResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no real thickness reaches {frequency_ghz} GHz; the lateral term alone is {lateral_ghz} GHz")]
    InfeasibleFrequency { frequency_ghz: f64, lateral_ghz: f64 },

    #[error("underdetermined calibration: {unknowns} unknowns from {points} usable points")]
    Underdetermined { unknowns: usize, points: usize },

    #[error("trim of {depth_nm:.3} nm exceeds the {available_nm:.3} nm available in the top layer")]
    InfeasibleTrim { depth_nm: f64, available_nm: f64 },

    #[error("layer orientations do not alternate; not a periodically poled stack")]
    NotPeriodicallyPoled,

    #[error("degenerate resonance: {0}")]
    Degenerate(String),

    #[error("parallel resonance {fp} GHz is below series resonance {fs} GHz")]
    ResonanceOrdering { fs: f64, fp: f64 },

    #[error("non-physical two-port at {frequency_ghz} GHz (sweep index {index})")]
    NonPhysical { index: usize, frequency_ghz: f64 },

    #[error("no passband: transmission peaks at the sweep boundary")]
    NoPassband,

    #[error("passband not resolved: missing 3-dB crossing on the {side} side")]
    BandNotResolved { side: &'static str },

    #[error("no interior admittance peak found")]
    NoResonance,

    #[error("fit did not converge: residual {:.3e} above ceiling", .0.residual)]
    NotConverged(Box<FitResult>),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported Touchstone format: {0}")]
    UnsupportedFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
