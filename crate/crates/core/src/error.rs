use thiserror::Error;

/// Errors raised across the simulator.
///
/// Receiver failures are never reported through this type: a frame that
/// cannot be synchronized or decoded is described by an `RxPacketReport`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("PDU length {0} bits outside 16..=2056")]
    PduLength(usize),

    #[error("operation not defined for PHY mode {0}")]
    Mode(crate::phy::PhyMode),

    #[error("input too short: need at least {needed}, got {got}")]
    Length { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("invalid channel profile: {0}")]
    Profile(String),

    #[error("sample rate mismatch: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),

    #[error("channel map error: {0}")]
    Map(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no signal: band power below detection floor")]
    NoSignal,

    #[error("synchronization failed: peak correlation {peak:.3} below threshold {threshold:.3}")]
    SyncFailure { peak: f64, threshold: f64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
