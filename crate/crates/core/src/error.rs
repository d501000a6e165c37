use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::ode::OdeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse {field}: {source}")]
    Expression {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("{context}: {source}")]
    Evaluation {
        context: String,
        #[source]
        source: EvalError,
    },
    #[error("invalid interval [{x0}, {x1}]: need finite x0 < x1")]
    InvalidInterval { x0: f64, x1: f64 },
    #[error("invalid problem: {0}")]
    Schema(String),
    #[error("malformed problem document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} requires an integrand and a candidate")]
    NeedsIntegrand(&'static str),
    #[error("Legendre condition violated: P({x}) = {p} is not positive")]
    Legendre { x: f64, p: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("integration of the {what} equation stalled at x = {at}")]
    StepUnderflow { what: &'static str, at: f64 },
    #[error("no strictly positive Jacobi solution exists: {0}")]
    C5Fails(String),
    #[error("positive-solution construction failed at x = {at}")]
    Construction { at: f64 },
    #[error("Jacobi solution is not strictly positive: u({x}) = {u}")]
    NonPositive { x: f64, u: f64 },
    #[error("tridiagonal factorization broke down at shift {shift}")]
    Factorization { shift: f64 },
    #[error("test function does not vanish at the endpoints: h(x0) = {left}, h(x1) = {right}")]
    BoundaryValues { left: f64, right: f64 },
}

impl Error {
    pub(crate) fn eval(context: impl Into<String>, source: EvalError) -> Self {
        Error::Evaluation {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
