use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entries in {0}")]
    NonFinite(String),

    #[error("resonant spectra: the vectorized Sylvester operator is singular")]
    ResonantSpectra,

    #[error("no finite relative degree: C A^i B vanishes for every i < n")]
    NoRelativeDegree,

    #[error("degenerate pencil: the Rosenbrock determinant vanishes identically")]
    DegeneratePencil,

    #[error("relative degree r ≠ 1 (r = {0})")]
    RelativeDegreeNotOne(usize),

    #[error("feedthrough D ≠ 0 is not allowed here")]
    NonzeroFeedthrough,

    #[error("feedthrough D = 0 is not allowed here")]
    ZeroFeedthrough,

    #[error("integration blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("near-singular transition matrix at t = {time} (condition number {cond:e})")]
    NearSingular { time: f64, cond: f64 },

    #[error("evaluation at breakpoint t = {0} requires a side selector")]
    BreakpointSide(f64),

    #[error("invalid time arguments: {0}")]
    InvalidTime(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("plant is not minimum phase")]
    NotMinimumPhase,

    #[error("unbounded carrier sample {value} at t = {time}")]
    UnboundedCarrier { time: f64, value: f64 },

    #[error("scenario error at {path}: {message}")]
    Scenario { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
