use thiserror::Error;

/// Errors produced by compilation, evaluation and the numerical solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CoreError {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain violation: guard {guard} evaluated to {value}")]
    DomainViolation { guard: usize, value: f64 },

    #[error("Newton iteration diverged at step {step}: residual {residual:e}")]
    NewtonDivergence { step: usize, residual: f64 },

    #[error("singular Legendre transform: condition number {cond:e}")]
    SingularLegendre { cond: f64 },

    #[error("singular family at node {node:?}: |det| = {det:e}")]
    SingularFamily { node: Vec<f64>, det: f64 },

    #[error("degenerate generating function: condition number {cond:e}")]
    DegenerateGenerator { cond: f64 },

    #[error("unsupported jet order k = {k} (supported: 1, 2, 3)")]
    UnsupportedOrder { k: usize },

    #[error("flow failed at t = {t}: {source}")]
    FlowFailure {
        t: f64,
        #[source]
        source: Box<CoreError>,
    },

    #[error("non-finite value detected at t = {t}")]
    NonFinite { t: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operation not supported by this field backend: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
