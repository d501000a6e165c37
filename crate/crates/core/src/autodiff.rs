//! Hyper-dual numbers: exact first and mixed second derivatives by
//! forward-mode evaluation.
//!
//! A hyper-dual number `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`
//! carries a value, two directional first derivatives and the mixed second
//! derivative along the two seeded directions. Seeding both directions on the
//! same variable yields a pure second derivative. No step size is involved,
//! so this is an independent check on the symbolic engine in [`crate::expr`].

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::expr::{Bindings, EvalError, Expr, Func, Scalar, VAR_X, VAR_Y, VAR_YP};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub const fn new(value: f64, d1: f64, d2: f64, d12: f64) -> Self {
        HyperDual { value, d1, d2, d12 }
    }

    pub const fn constant(value: f64) -> Self {
        HyperDual::new(value, 0.0, 0.0, 0.0)
    }

    fn has_derivatives(&self) -> bool {
        self.d1 != 0.0 || self.d2 != 0.0 || self.d12 != 0.0
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    fn chain(self, g: f64, g1: f64, g2: f64) -> Self {
        if !self.has_derivatives() {
            return HyperDual::constant(g);
        }
        HyperDual {
            value: g,
            d1: g1 * self.d1,
            d2: g1 * self.d2,
            d12: g1 * self.d12 + g2 * self.d1 * self.d2,
        }
    }

    fn recip(self) -> Self {
        let t = self.value;
        self.chain(1.0 / t, -1.0 / (t * t), 2.0 / (t * t * t))
    }

    fn ln(self) -> Self {
        let t = self.value;
        self.chain(t.ln(), 1.0 / t, -1.0 / (t * t))
    }

    fn exp(self) -> Self {
        let g = self.value.exp();
        self.chain(g, g, g)
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual::new(
            self.value + o.value,
            self.d1 + o.d1,
            self.d2 + o.d2,
            self.d12 + o.d12,
        )
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual::new(
            self.value - o.value,
            self.d1 - o.d1,
            self.d2 - o.d2,
            self.d12 - o.d12,
        )
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual {
            value: self.value * o.value,
            d1: self.value * o.d1 + self.d1 * o.value,
            d2: self.value * o.d2 + self.d2 * o.value,
            d12: self.value * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.value,
        }
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        if !o.has_derivatives() {
            let inv = 1.0 / o.value;
            return HyperDual {
                value: self.value / o.value,
                d1: self.d1 * inv,
                d2: self.d2 * inv,
                d12: self.d12 * inv,
            };
        }
        let mut out = self * o.recip();
        out.value = self.value / o.value;
        out
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual::new(-self.value, -self.d1, -self.d2, -self.d12)
    }
}

impl Scalar for HyperDual {
    fn from_f64(c: f64) -> Self {
        HyperDual::constant(c)
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d12.is_finite()
    }

    fn powf(self, exponent: Self) -> Self {
        let value = self.value.powf(exponent.value);
        if !exponent.has_derivatives() {
            let c = exponent.value;
            let t = self.value;
            let g1 = if c == 1.0 { 1.0 } else { c * t.powf(c - 1.0) };
            let g2 = if c == 1.0 || c == 0.0 {
                0.0
            } else if c == 2.0 {
                2.0
            } else {
                c * (c - 1.0) * t.powf(c - 2.0)
            };
            let g1 = if c == 0.0 { 0.0 } else { g1 };
            return self.chain(value, g1, g2);
        }
        if !self.has_derivatives() {
            let l = self.value.ln();
            return exponent.chain(value, value * l, value * l * l);
        }
        let mut out = (exponent * self.ln()).exp();
        out.value = value;
        out
    }

    fn apply(self, func: Func) -> Self {
        let t = self.value;
        let g = func.apply_f64(t);
        let (g1, g2) = match func {
            Func::Sin => (t.cos(), -g),
            Func::Cos => (-t.sin(), -g),
            Func::Tan => {
                let sec2 = 1.0 + g * g;
                (sec2, 2.0 * g * sec2)
            }
            Func::Exp => (g, g),
            Func::Log => (1.0 / t, -1.0 / (t * t)),
            Func::Sqrt => (0.5 / g, -0.25 / (g * g * g)),
            Func::Sinh => (t.cosh(), g),
            Func::Cosh => (t.sinh(), g),
            Func::Tanh => {
                let s = 1.0 - g * g;
                (s, -2.0 * g * s)
            }
            Func::Atan => {
                let q = 1.0 + t * t;
                (1.0 / q, -2.0 * t / (q * q))
            }
            Func::Abs => (Func::Sign.apply_f64(t), 0.0),
            Func::Sign => (0.0, 0.0),
        };
        self.chain(g, g1, g2)
    }
}

/// Evaluates `e` over hyper-dual bindings.
pub fn eval_hyperdual<B: Bindings<HyperDual> + ?Sized>(
    e: &Expr,
    bindings: &B,
) -> Result<HyperDual, EvalError> {
    e.eval_generic(bindings)
}

/// The three second partials of an integrand with respect to `(yp, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondPartials {
    pub f_pp: f64,
    pub f_py: f64,
    pub f_yy: f64,
}

/// Second partials of `f(yp, y, x)` at a point, from three hyper-dual passes
/// seeded along `(yp, yp)`, `(yp, y)` and `(y, y)`.
pub fn hessian_pq(f: &Expr, p: f64, y: f64, x: f64) -> Result<SecondPartials, EvalError> {
    let pass = |p_seed: (f64, f64), y_seed: (f64, f64)| {
        let b = [
            (VAR_YP, HyperDual::new(p, p_seed.0, p_seed.1, 0.0)),
            (VAR_Y, HyperDual::new(y, y_seed.0, y_seed.1, 0.0)),
            (VAR_X, HyperDual::constant(x)),
        ];
        eval_hyperdual(f, &b).map(|h| h.d12)
    };
    Ok(SecondPartials {
        f_pp: pass((1.0, 1.0), (0.0, 0.0))?,
        f_py: pass((1.0, 0.0), (0.0, 1.0))?,
        f_yy: pass((0.0, 0.0), (1.0, 1.0))?,
    })
}
