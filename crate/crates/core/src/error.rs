use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid coupling matrix: {0}")]
    InvalidCoupling(String),

    #[error("invalid ensemble state: {0}")]
    InvalidState(String),

    #[error("probabilities are not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },

    #[error("kernel validation failed: {}", .0.join("; "))]
    InvalidKernel(Vec<String>),

    #[error("kernel table too coarse near zero: first spacing {spacing} > 1e-3")]
    KernelTooCoarse { spacing: f64 },

    #[error("kernel spec `{0}` not recognised (expected flat | cosine | spiked:<c> | table:<path>)")]
    KernelSpec(String),

    #[error("singular configuration: kernel-weighted density vanishes for occupied observable value {value}")]
    SingularConfiguration { value: usize },

    #[error("integration failed at t = {t}: non-finite state")]
    IntegrationFailure { t: f64 },

    #[error("adaptive step collapsed below 1e-12 at t = {t} (stiffness)")]
    StepCollapse { t: f64 },

    #[error("invalid integrator controls: {0}")]
    InvalidControls(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no steady state exists for lambda = {lambda} (requires lambda > 0)")]
    NoSteadyState { lambda: f64 },

    #[error("singular formula: {0}")]
    Singular(String),

    #[error("moment of order {0} missing")]
    MissingMoment(i32),

    #[error("Monte Carlo step too large: transition probability {prob} > 0.1")]
    StepTooLarge { prob: f64 },

    #[error("series too short: {0}")]
    SeriesTooShort(String),

    #[error("config error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("unknown preset `{name}`; available: {}", .available.join(", "))]
    UnknownPreset { name: String, available: Vec<String> },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
