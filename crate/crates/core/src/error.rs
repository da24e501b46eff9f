use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("disconnected after {0} retries")]
    Disconnected(usize),

    #[error("lambda2 undefined/zero: graph is disconnected")]
    Lambda2Undefined,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("blow-up detected at t = {t}")]
    BlowUp { t: f64 },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("alpha below threshold: unperturbed run does not synchronize (E_a = {0})")]
    AlphaBelowThreshold(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
