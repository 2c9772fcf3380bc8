use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wavelength {wavelength_nm:.3} nm is not red-detuned from both D lines")]
    NotRedDetuned { wavelength_nm: f64 },

    #[error("unknown hyperfine level F={0}")]
    UnknownLevel(i32),

    #[error("species data: {0}")]
    Species(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("unaddressable configuration: {0}")]
    Unaddressable(String),

    #[error("eigensolver: {0}")]
    Eigensolver(String),

    #[error("domain too small / atom escaped (edge amplitude {amplitude:.3e})")]
    Escaped { amplitude: f64 },

    #[error("wavefunctions live on different grids")]
    GridMismatch,

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("no interaction overlap at the end of the merge")]
    NoOverlap,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::NotRedDetuned { .. }
                | Error::UnknownLevel(_)
                | Error::Species(_)
                | Error::Config(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}
