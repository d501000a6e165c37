use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use super::{BinOp, Expr, Func, VAR_X};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },
}

impl EvalError {
    fn domain(e: &Expr, reason: &str) -> Self {
        EvalError::Domain {
            expr: e.to_string(),
            reason: reason.to_string(),
        }
    }
}

/// Number types the evaluator can walk an [`Expr`] with.
///
/// Domain checks are made on [`Scalar::value`], so every implementor agrees
/// with plain `f64` evaluation about which points are admissible.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(c: f64) -> Self;
    fn value(&self) -> f64;
    fn is_finite(&self) -> bool;
    fn powf(self, exponent: Self) -> Self;
    fn apply(self, func: Func) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn powf(self, exponent: Self) -> Self {
        f64::powf(self, exponent)
    }
    fn apply(self, func: Func) -> Self {
        func.apply_f64(self)
    }
}

/// Variable lookup for evaluation.
pub trait Bindings<T> {
    fn lookup(&self, name: &str) -> Option<T>;
}

impl<T: Copy> Bindings<T> for HashMap<String, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Bindings<T> for BTreeMap<String, T> {
    fn lookup(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Bindings<T> for [(&str, T)] {
    fn lookup(&self, name: &str) -> Option<T> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<T: Copy, const N: usize> Bindings<T> for [(&str, T); N] {
    fn lookup(&self, name: &str) -> Option<T> {
        self.as_slice().lookup(name)
    }
}

impl Expr {
    /// Evaluates with real bindings.
    pub fn eval<B: Bindings<f64> + ?Sized>(&self, bindings: &B) -> Result<f64, EvalError> {
        self.eval_generic(bindings)
    }

    /// Evaluates an expression of the single variable `x`.
    pub fn eval_x(&self, x: f64) -> Result<f64, EvalError> {
        self.eval(&[(VAR_X, x)])
    }

    pub fn eval_generic<T: Scalar, B: Bindings<T> + ?Sized>(
        &self,
        bindings: &B,
    ) -> Result<T, EvalError> {
        let out = match self {
            Expr::Const(c) => T::from_f64(*c),
            Expr::Var(name) => bindings
                .lookup(name)
                .ok_or_else(|| EvalError::Unbound(name.clone()))?,
            Expr::Neg(a) => -a.eval_generic(bindings)?,
            Expr::Binary { op, lhs, rhs } => {
                let a = lhs.eval_generic(bindings)?;
                let b = rhs.eval_generic(bindings)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b.value() == 0.0 {
                            return Err(EvalError::domain(self, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        let (base, exp) = (a.value(), b.value());
                        if base < 0.0 && exp.fract() != 0.0 {
                            return Err(EvalError::domain(
                                self,
                                "negative base with non-integer exponent",
                            ));
                        }
                        if base == 0.0 && exp < 0.0 {
                            return Err(EvalError::domain(self, "zero to a negative power"));
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Call { func, arg } => {
                let a = arg.eval_generic(bindings)?;
                let t = a.value();
                match func {
                    Func::Log if t <= 0.0 => {
                        return Err(EvalError::domain(self, "logarithm of a nonpositive number"))
                    }
                    Func::Sqrt if t < 0.0 => {
                        return Err(EvalError::domain(self, "square root of a negative number"))
                    }
                    _ => {}
                }
                a.apply(*func)
            }
        };
        if !out.is_finite() {
            return Err(EvalError::domain(self, "non-finite result"));
        }
        Ok(out)
    }
}
