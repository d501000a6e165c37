//! Second-order sufficient conditions for one-dimensional problems in the
//! calculus of variations.
//!
//! Given an integrand `f(y', y, x)` and a stationary candidate `y*`, the
//! crate decides whether `y*` is a strict local minimizer by integrating the
//! Jacobi accessory equation `(P u')' = Q u` from `u(x0) = 0, u'(x0) = 1` and
//! checking that the solution stays positive on `(x0, x1]`.
//!
//! The equivalent conditions are available as independent cross-checks:
//! bounded Riccati solutions ([`riccati`]), coercivity of the second
//! variation ([`quadform`]), absence of conjugate points and a strictly
//! positive Jacobi solution ([`jacobi`]).

// Negated comparisons deliberately treat NaN as failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod expr;
pub mod jacobi;
pub mod ode;
pub mod quad;
pub mod quadform;
pub mod riccati;
pub mod settings;
pub mod variational;
pub mod verdict;

pub use error::{Error, Result};
pub use expr::Expr;
pub use settings::{Interval, Settings};
pub use variational::Problem;
pub use verdict::{check_problem, Report, Verdict};

/// Crate version, echoed in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
