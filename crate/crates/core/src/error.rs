use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("space mismatch: {0} vs {1}")]
    SpaceMismatch(String, String),
    #[error("chart {chart} is not a chart of space {space}")]
    UnknownChart { chart: String, space: String },
    #[error("coordinates outside the domain of chart {chart}: {coords:?}")]
    OutsideChart { chart: String, coords: Vec<f64> },
    #[error("non-finite coordinate in {0:?}")]
    NonFinite(Vec<f64>),
    #[error("expected {expected} coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("step size underflow, integration reached t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step limit exceeded, integration reached t = {t}")]
    TooManySteps { t: f64 },
    #[error("no section crossing within |t| <= {cap}")]
    NoCrossing { cap: f64 },
    #[error("grazing section crossing at t = {t} (normal velocity {vn:e})")]
    Grazing { t: f64, vn: f64 },
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("at grid node tau = {tau}: {source}")]
    AtNode { tau: f64, source: Box<Error> },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
