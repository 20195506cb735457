use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid must have at least 3 cells, got {0}")]
    GridTooSmall(usize),

    #[error("grid mismatch: expected {expected} cells, got {got}")]
    GridMismatch { expected: usize, got: usize },

    #[error("grid with {fine} cells is not a refinement of grid with {coarse} cells")]
    NonNested { fine: usize, coarse: usize },

    #[error("non-finite value {value} in cell {cell}")]
    NonFinite { cell: usize, value: f64 },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("config: missing required key `{0}`")]
    MissingKey(String),

    #[error("unknown {kind} family `{name}`")]
    UnknownFamily { kind: &'static str, name: String },

    #[error("inadmissible parameters: {0}")]
    Admissibility(String),

    #[error("assumption violated: {bound} at {witness}")]
    AssumptionViolated { bound: String, witness: String },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("corrupted state: h'({v}) = {dh} in cell {cell} is below C_h1/2")]
    CorruptedState { cell: usize, v: f64, dh: f64 },

    #[error("singular tridiagonal system at row {0}")]
    Singular(usize),

    #[error("Newton failed at t = {t} after {halvings} step halvings (dt = {dt}, residual {residual:e})")]
    NewtonFailure {
        t: f64,
        dt: f64,
        halvings: usize,
        residual: f64,
    },

    #[error("step size underflow at t = {t} (dt = {dt:e}); problem too stiff for the explicit method")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
