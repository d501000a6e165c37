use log::warn;

use super::{BinOp, Expr, Func};

impl Expr {
    /// Exact symbolic partial derivative with respect to `var`.
    ///
    /// The result is only lightly simplified (constant folding and 0/1
    /// identities). `abs` is differentiated as `sign(t)`, which is 0 at
    /// `t = 0`; a warning is logged when that convention is used.
    pub fn differentiate(&self, var: &str) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(name) => Expr::Const(if name == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => a.differentiate(var).neg(),
            Expr::Binary { op, lhs, rhs } => {
                let (u, v) = (lhs.as_ref(), rhs.as_ref());
                match op {
                    BinOp::Add => u.differentiate(var).add(v.differentiate(var)),
                    BinOp::Sub => u.differentiate(var).sub(v.differentiate(var)),
                    BinOp::Mul => {
                        let du = u.differentiate(var);
                        let dv = v.differentiate(var);
                        du.mul(v.clone()).add(u.clone().mul(dv))
                    }
                    BinOp::Div => {
                        let du = u.differentiate(var);
                        let dv = v.differentiate(var);
                        if !v.contains_var(var) {
                            return du.div(v.clone());
                        }
                        du.mul(v.clone())
                            .sub(u.clone().mul(dv))
                            .div(v.clone().pow(Expr::Const(2.0)))
                    }
                    BinOp::Pow => pow_derivative(u, v, var),
                }
            }
            Expr::Call { func, arg } => {
                let da = arg.differentiate(var);
                if da.as_const() == Some(0.0) {
                    return Expr::Const(0.0);
                }
                let a = arg.as_ref().clone();
                let outer = match func {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::call(Func::Sin, a).neg(),
                    Func::Tan => Expr::Const(1.0).add(Expr::call(Func::Tan, a).pow(Expr::Const(2.0))),
                    Func::Exp => Expr::call(Func::Exp, a),
                    Func::Log => return da.div(a),
                    Func::Sqrt => {
                        return da.div(Expr::Const(2.0).mul(Expr::call(Func::Sqrt, a)));
                    }
                    Func::Sinh => Expr::call(Func::Cosh, a),
                    Func::Cosh => Expr::call(Func::Sinh, a),
                    Func::Tanh => {
                        Expr::Const(1.0).sub(Expr::call(Func::Tanh, a).pow(Expr::Const(2.0)))
                    }
                    Func::Atan => {
                        return da.div(Expr::Const(1.0).add(a.pow(Expr::Const(2.0))));
                    }
                    Func::Abs => {
                        warn!(
                            "differentiating abs({a}) with d|t|/dt = sign(t), taken as 0 at t = 0"
                        );
                        Expr::call(Func::Sign, a)
                    }
                    // Piecewise constant; the jump at 0 is ignored.
                    Func::Sign => return Expr::Const(0.0),
                };
                outer.mul(da)
            }
        }
    }
}

fn pow_derivative(u: &Expr, v: &Expr, var: &str) -> Expr {
    let du = u.differentiate(var);
    if !v.contains_var(var) {
        // Power rule: v * u^(v-1) * u'. Valid for negative bases with integer v.
        if du.as_const() == Some(0.0) {
            return Expr::Const(0.0);
        }
        let reduced = v.clone().sub(Expr::Const(1.0));
        return v.clone().mul(u.clone().pow(reduced)).mul(du);
    }
    let dv = v.differentiate(var);
    let ln_u = Expr::call(Func::Log, u.clone());
    if !u.contains_var(var) {
        // a^v * ln(a) * v'
        return u.clone().pow(v.clone()).mul(ln_u).mul(dv);
    }
    // u^v * (v' ln u + v u' / u)
    let inner = dv.mul(ln_u).add(v.clone().mul(du).div(u.clone()));
    u.clone().pow(v.clone()).mul(inner)
}
