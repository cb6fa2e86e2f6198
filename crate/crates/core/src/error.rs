use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeoError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("point {point:?} lies outside the chart")]
    Domain { point: Vec<f64> },

    #[error("F² is not twice differentiable at v = 0 (|v| = {norm:e} below the floor)")]
    Nondifferentiable { norm: f64 },

    #[error("not a Randers metric: |ω|_h = {max_norm} at {point:?}")]
    InvalidRanders { max_norm: f64, point: Vec<f64> },

    #[error("invalid metric data: {0}")]
    InvalidData(String),

    #[error("curve is not regular: speed {speed:e} at sample {index}")]
    Regularity { index: usize, speed: f64 },

    #[error("trajectory left the chart at s = {s}")]
    ChartExit { s: f64 },

    #[error("Newton iteration stalled after {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("sample {index} has causal class {class}, expected {expected}")]
    CausalCharacter { index: usize, class: String, expected: String },

    #[error("two conjugate points may share the cell [{s_lo}, {s_hi}]; rerun with doubled resolution")]
    BracketAmbiguity { s_lo: f64, s_hi: f64 },

    #[error("finite-difference steps {step} and {refined} disagree by {discrepancy:e}")]
    StepSize { step: f64, refined: f64, discrepancy: f64 },

    #[error("reparametrization failed: endpoint mismatch {mismatch:e}")]
    Reparametrization { mismatch: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{what} certificate failed: {value:e} exceeds {tolerance:e}")]
    Certificate { what: String, value: f64, tolerance: f64 },

    #[error("singular linear system")]
    Singular,
}
