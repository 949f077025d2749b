use thiserror::Error;

/// Errors raised by the simulator.
///
/// `Config` variants flag bad user input; `Physics` variants flag a
/// well-formed request that violates a physical precondition (zero field,
/// non-positive temperature, an unaddressable carrier, ...).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("level labeling failed: {0}")]
    Labeling(String),
    #[error("carrier at {freq_mhz} MHz matches no addressable transition")]
    UnmatchedCarrier { freq_mhz: f64 },
    #[error("integration failed at t = {t_us} us: {reason}")]
    Integration { t_us: f64, reason: String },
    #[error("gate {gate} cannot be expressed in the {encoding} encoding")]
    Unencodable { gate: String, encoding: String },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("schedule parse error at line {line}: {reason}")]
    ScheduleParse { line: usize, reason: String },
}

impl Error {
    /// True for errors caused by malformed input rather than physics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::ScheduleParse { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
