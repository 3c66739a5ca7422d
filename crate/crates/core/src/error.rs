use thiserror::Error;

/// Errors raised by the model, integrators and continuation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("state outside model domain: {0}")]
    Domain(String),

    #[error("unknown preset `{name}` (valid presets: {valid})")]
    UnknownPreset { name: String, valid: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonFailure {
        iterations: usize,
        residual: f64,
        /// Last iterate, in the unknowns of the failing solve.
        last: Vec<f64>,
    },

    #[error("step size underflow at tau = {time:e} (h = {step:e}); last state x = {x}, u = {u}")]
    StiffnessFailure { time: f64, step: f64, x: f64, u: f64 },

    #[error("singular linear system")]
    Singular,

    #[error("not a Hopf point: {0}")]
    NotHopf(String),

    #[error("degenerate cycle seed: {0}")]
    DegenerateSeed(String),

    #[error("point ({u_a}, {f}) lies outside the analysed window")]
    OutsideWindow { u_a: f64, f: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
