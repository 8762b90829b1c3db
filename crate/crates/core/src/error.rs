use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HlbError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("point (0, {y}) is not a sliding point (fL1 = {fl1}, fR1 = {fr1})")]
    NotSliding { y: f64, fl1: f64, fr1: f64 },
    #[error("degenerate sliding configuration: fL1 = fR1 = {0}")]
    DegenerateSliding(f64),
    #[error("no sign change on bracket [{t0}, {t1}]")]
    Bracket { t0: f64, t1: f64 },
    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),
    #[error("no return to the section within t = {0}")]
    NoReturn(f64),
    #[error("trajectory blew up at t = {0}")]
    BlowUp(f64),
    #[error("Zeno behaviour: {count} events within {span:e} time units near t = {t}")]
    Zeno { count: usize, span: f64, t: f64 },
    #[error("unknown catalog id `{0}`")]
    UnknownId(String),
    #[error("sweep failed: {0}")]
    SweepFailed(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, HlbError>;

impl From<std::io::Error> for HlbError {
    fn from(e: std::io::Error) -> Self {
        HlbError::Io(e.to_string())
    }
}
