//! Scalar expressions in named variables.
//!
//! An [`Expr`] is the common currency of the crate: integrands `f(yp, y, x)`,
//! candidate extremals `y*(x)` and coefficient overrides are all parsed into
//! this tree, then evaluated, differentiated or composed.
//!
//! The grammar is deliberately small:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          // right-associative, binds tightest
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `pi` and `e` are constants. Reserved variable names are `yp` (the
//! derivative y'), `y` and `x`.

mod diff;
mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use eval::{Bindings, EvalError, Scalar};
pub use parse::ParseError;

/// Variable name standing for y'(x) in integrands.
pub const VAR_YP: &str = "yp";
/// Variable name standing for y(x) in integrands.
pub const VAR_Y: &str = "y";
/// The independent variable.
pub const VAR_X: &str = "x";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Elementary functions of one argument.
///
/// `Sign` is not part of the documented input grammar but is accepted by the
/// parser; it appears in derivatives of `abs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
    Abs,
    Sign,
}

impl Func {
    pub const ALL: [Func; 12] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Atan,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// Plain real evaluation, without domain checks.
    pub fn apply_f64(self, t: f64) -> f64 {
        match self {
            Func::Sin => t.sin(),
            Func::Cos => t.cos(),
            Func::Tan => t.tan(),
            Func::Exp => t.exp(),
            Func::Log => t.ln(),
            Func::Sqrt => t.sqrt(),
            Func::Sinh => t.sinh(),
            Func::Cosh => t.cosh(),
            Func::Tanh => t.tanh(),
            Func::Atan => t.atan(),
            Func::Abs => t.abs(),
            Func::Sign => {
                if t == 0.0 {
                    0.0
                } else {
                    t.signum()
                }
            }
        }
    }
}

/// Expression tree. Immutable once built; cloning is a deep copy.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
    },
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse::parse(text)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(name: impl Into<String>) -> Expr {
        let name = name.into();
        assert!(!name.is_empty(), "variable names must be nonempty");
        Expr::Var(name)
    }

    /// Builds a binary node verbatim, without any folding.
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        if let Expr::Const(c) = arg {
            let v = func.apply_f64(c);
            if v.is_finite() && func != Func::Sign && func != Func::Abs {
                return Expr::Const(v);
            }
        }
        Expr::Call {
            func,
            arg: Box::new(arg),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    fn fold(op: BinOp, a: f64, b: f64) -> Option<f64> {
        let v = match op {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div => {
                if b == 0.0 {
                    return None;
                }
                a / b
            }
            BinOp::Pow => a.powf(b),
        };
        v.is_finite().then_some(v)
    }

    fn folded(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        if let (Some(a), Some(b)) = (lhs.as_const(), rhs.as_const()) {
            if let Some(v) = Expr::fold(op, a, b) {
                return Expr::Const(v);
            }
        }
        Expr::binary(op, lhs, rhs)
    }

    // Smart constructors: constant folding and 0/1 identities only.

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: Expr) -> Expr {
        if self.is_zero() {
            rhs
        } else if rhs.is_zero() {
            self
        } else {
            Expr::folded(BinOp::Add, self, rhs)
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, rhs: Expr) -> Expr {
        if rhs.is_zero() {
            self
        } else if self.is_zero() {
            rhs.neg()
        } else {
            Expr::folded(BinOp::Sub, self, rhs)
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, rhs: Expr) -> Expr {
        if self.is_zero() || rhs.is_zero() {
            Expr::Const(0.0)
        } else if self.is_one() {
            rhs
        } else if rhs.is_one() {
            self
        } else {
            Expr::folded(BinOp::Mul, self, rhs)
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, rhs: Expr) -> Expr {
        if rhs.is_one() {
            self
        } else if self.is_zero() && !rhs.is_zero() {
            Expr::Const(0.0)
        } else {
            Expr::folded(BinOp::Div, self, rhs)
        }
    }

    pub fn pow(self, rhs: Expr) -> Expr {
        if rhs.is_one() {
            self
        } else if rhs.is_zero() {
            Expr::Const(1.0)
        } else {
            Expr::folded(BinOp::Pow, self, rhs)
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(self) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    /// Set of variable names appearing in the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Neg(a) | Expr::Call { arg: a, .. } => a.collect_vars(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }

    pub fn contains_var(&self, var: &str) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(name) => name == var,
            Expr::Neg(a) | Expr::Call { arg: a, .. } => a.contains_var(var),
            Expr::Binary { lhs, rhs, .. } => lhs.contains_var(var) || rhs.contains_var(var),
        }
    }

    /// True when the expression has no variables at all.
    pub fn is_closed(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call { arg: a, .. } => a.is_closed(),
            Expr::Binary { lhs, rhs, .. } => lhs.is_closed() && rhs.is_closed(),
        }
    }

    pub fn contains_func(&self, func: Func) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Neg(a) => a.contains_func(func),
            Expr::Call { func: f, arg } => *f == func || arg.contains_func(func),
            Expr::Binary { lhs, rhs, .. } => lhs.contains_func(func) || rhs.contains_func(func),
        }
    }

    /// Replaces every occurrence of `var` with `replacement`.
    pub fn substitute(&self, var: &str, replacement: &Expr) -> Expr {
        match self {
            Expr::Const(_) => self.clone(),
            Expr::Var(name) if name == var => replacement.clone(),
            Expr::Var(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(var, replacement))),
            Expr::Call { func, arg } => Expr::Call {
                func: *func,
                arg: Box::new(arg.substitute(var, replacement)),
            },
            Expr::Binary { op, lhs, rhs } => Expr::binary(
                *op,
                lhs.substitute(var, replacement),
                rhs.substitute(var, replacement),
            ),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            Expr::Const(_) | Expr::Var(_) | Expr::Call { .. } => 5,
            Expr::Neg(_) => 3,
            Expr::Binary { op, .. } => op.precedence(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, a.precedence() < 4)
            }
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
            Expr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                match op {
                    BinOp::Pow => {
                        child(f, lhs, lhs.precedence() <= p)?;
                        write!(f, "^")?;
                        child(f, rhs, rhs.precedence() < p)
                    }
                    BinOp::Add | BinOp::Mul => {
                        child(f, lhs, lhs.precedence() < p)?;
                        write!(f, " {} ", op.symbol())?;
                        child(f, rhs, rhs.precedence() < p)
                    }
                    BinOp::Sub | BinOp::Div => {
                        child(f, lhs, lhs.precedence() < p)?;
                        write!(f, " {} ", op.symbol())?;
                        child(f, rhs, rhs.precedence() <= p)
                    }
                }
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}
