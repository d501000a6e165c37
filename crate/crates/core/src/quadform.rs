//! Quadratic forms of the second variation and the coercivity oracle.
//!
//! `Ω(h) = ∫ P h'² + 2 R h' h + Q h²` and `Γ(h) = ∫ P h'² + Q h²` are
//! evaluated by Simpson quadrature on test functions vanishing at both ends.
//! The coercivity constant is the smallest eigenvalue of the pencil `(A, B)`
//! where `A` discretizes `Γ` and `B` the H¹ norm `∫ h'² + h²` with first
//! differences on a uniform mesh. Both matrices are symmetric tridiagonal, so
//! this shares no code with the Jacobi integrator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func, VAR_X};
use crate::quad::simpson;
use crate::settings::Interval;
use crate::variational::CoefficientSet;

/// Endpoint values larger than this are rejected.
const BOUNDARY_TOL: f64 = 1e-12;

/// A test function `h(x)` with `h(x0) = h(x1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub label: String,
    pub expr: Expr,
    pub derivative: Expr,
    pub interval: Interval,
}

impl TestFunction {
    pub fn new(label: impl Into<String>, expr: Expr, interval: Interval) -> Result<Self> {
        let at = |x: f64| {
            expr.eval_x(x)
                .map_err(|e| Error::eval(format!("test function at x = {x}"), e))
        };
        let (left, right) = (at(interval.start())?, at(interval.end())?);
        if left.abs() > BOUNDARY_TOL || right.abs() > BOUNDARY_TOL {
            return Err(Error::BoundaryValues { left, right });
        }
        Ok(TestFunction {
            label: label.into(),
            derivative: expr.differentiate(VAR_X),
            expr,
            interval,
        })
    }

    pub fn parse(text: &str, interval: Interval) -> Result<Self> {
        let expr = Expr::parse(text).map_err(|source| Error::Expression {
            field: "test function".into(),
            source,
        })?;
        TestFunction::new(text, expr, interval)
    }

    /// `h(x)`; NaN outside the domain of the expression.
    pub fn value(&self, x: f64) -> f64 {
        self.expr.eval_x(x).unwrap_or(f64::NAN)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.derivative.eval_x(x).unwrap_or(f64::NAN)
    }

    /// `c h`.
    pub fn scaled(&self, c: f64) -> TestFunction {
        TestFunction {
            label: format!("{c}*({})", self.label),
            expr: Expr::constant(c).mul(self.expr.clone()),
            derivative: Expr::constant(c).mul(self.derivative.clone()),
            interval: self.interval,
        }
    }

    /// `(∫ h² + h'²)^(1/2)`.
    pub fn h1_norm(&self, n: usize) -> f64 {
        let (a, b) = (self.interval.start(), self.interval.end());
        simpson(|x| self.value(x).powi(2) + self.slope(x).powi(2), a, b, n).sqrt()
    }

    /// The same function scaled to unit H¹ norm.
    pub fn normalized(&self, n: usize) -> TestFunction {
        let mut out = self.scaled(1.0 / self.h1_norm(n));
        out.label.clone_from(&self.label);
        out
    }
}

/// `sin(kπ t)` for `k = 1..=8` and `(x - x0)(x1 - x) t^j` for `j = 0..=3`,
/// with `t = (x - x0)/(x1 - x0)`, each normalized to unit H¹ norm.
pub fn test_battery(interval: Interval, n: usize) -> Vec<TestFunction> {
    let (x0, x1, len) = (interval.start(), interval.end(), interval.span());
    let x = || Expr::var(VAR_X);
    let t = || x().sub(Expr::constant(x0)).div(Expr::constant(len));
    let mut out = Vec::with_capacity(12);
    for k in 1..=8 {
        let arg = Expr::constant(k as f64 * std::f64::consts::PI).mul(t());
        let expr = Expr::call(Func::Sin, arg);
        out.push(TestFunction {
            label: format!("sin({k}*pi*t)"),
            derivative: expr.differentiate(VAR_X),
            expr,
            interval,
        });
    }
    for j in 0..=3 {
        let bump = x().sub(Expr::constant(x0)).mul(Expr::constant(x1).sub(x()));
        let expr = bump.mul(t().pow(Expr::constant(j as f64)));
        out.push(TestFunction {
            label: format!("bump*t^{j}"),
            derivative: expr.differentiate(VAR_X),
            expr,
            interval,
        });
    }
    out.into_iter().map(|h| h.normalized(n)).collect()
}

/// `∫ P h'² + 2 R h' h + Q h² dx` by Simpson's rule with `n` panels.
pub fn omega<P, Q, R>(p: P, q: Q, r: R, h: &TestFunction, n: usize) -> f64
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    let (a, b) = (h.interval.start(), h.interval.end());
    simpson(
        |x| {
            let (v, d) = (h.value(x), h.slope(x));
            p(x) * d * d + 2.0 * r(x) * d * v + q(x) * v * v
        },
        a,
        b,
        n,
    )
}

/// `∫ P h'² + Q h² dx`.
pub fn gamma_form<P, Q>(p: P, q: Q, h: &TestFunction, n: usize) -> f64
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    omega(p, q, |_| 0.0, h, n)
}

/// The pair `(P, Q - R')` after integrating the cross term by parts.
pub fn reduce_omega(c: &CoefficientSet) -> (Expr, Expr) {
    (c.p.clone(), c.q_eff.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerfectSquare {
    /// `Γ(h)`.
    pub lhs: f64,
    /// `∫ P (h' + w h / P)²`.
    pub rhs: f64,
    pub gap: f64,
}

/// Compares `Γ(h)` with the completed square built from a Riccati solution `w`.
pub fn perfect_square_check<P, Q, W>(p: P, q: Q, w: W, h: &TestFunction, n: usize) -> PerfectSquare
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let lhs = gamma_form(&p, &q, h, n);
    let (a, b) = (h.interval.start(), h.interval.end());
    let rhs = simpson(
        |x| {
            let px = p(x);
            let s = h.slope(x) + w(x) * h.value(x) / px;
            px * s * s
        },
        a,
        b,
        n,
    );
    PerfectSquare {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    }
}

/// Smallest generalized eigenvalue of the discretized `Γ` against the H¹ norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoercivityEstimate {
    pub gamma: f64,
    /// Number of interior nodes.
    pub n: usize,
    pub xs: Vec<f64>,
    /// Eigenvector at the interior nodes, unit in the `B` inner product.
    pub mode: Vec<f64>,
    pub shift: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i] = M[i][i+1]`.
#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    fn mul(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mul(v).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// `self - sigma * other`.
    fn shifted(&self, other: &Tridiagonal, sigma: f64) -> Tridiagonal {
        Tridiagonal {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - sigma * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - sigma * b).collect(),
        }
    }

    /// Number of negative pivots of `LDLᵀ`, i.e. the number of eigenvalues
    /// below zero.
    fn negative_count(&self) -> usize {
        let mut count = 0;
        let mut d = 0.0f64;
        for i in 0..self.diag.len() {
            d = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.off[i - 1].powi(2) / d
            };
            if d == 0.0 {
                d = -f64::EPSILON * self.diag[i].abs().max(f64::MIN_POSITIVE);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Solves `self * x = rhs` by `LDLᵀ` without pivoting.
    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = rhs.len();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut z = vec![0.0; n];
        for i in 0..n {
            if i == 0 {
                d[0] = self.diag[0];
                z[0] = rhs[0];
            } else {
                l[i] = self.off[i - 1] / d[i - 1];
                d[i] = self.diag[i] - l[i] * self.off[i - 1];
                z[i] = rhs[i] - l[i] * z[i - 1];
            }
            if d[i] == 0.0 || !d[i].is_finite() {
                return None;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = z[i] / d[i];
            if i + 1 < n {
                x[i] -= l[i + 1] * x[i + 1];
            }
        }
        Some(x)
    }
}

const MAX_ITERATIONS: usize = 100_000;

/// Estimates the coercivity constant on `n` interior nodes.
///
/// The shift is placed just below the lowest eigenvalue by bisection on the
/// inertia of `A - σB`; inverse iteration from the all-ones vector then runs
/// until the Rayleigh quotient changes by less than `1e-12` relatively.
pub fn coercivity_constant<P, Q>(p: P, q: Q, interval: &Interval, n: usize) -> Result<CoercivityEstimate>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let n = n.max(16);
    let x0 = interval.start();
    let dx = interval.span() / (n + 1) as f64;
    let xs: Vec<f64> = (1..=n).map(|i| x0 + dx * i as f64).collect();
    let p_mid: Vec<f64> = (0..=n).map(|i| p(x0 + dx * (i as f64 + 0.5))).collect();
    let q_node: Vec<f64> = xs.iter().map(|&x| q(x)).collect();

    let a = Tridiagonal {
        diag: (0..n).map(|i| (p_mid[i] + p_mid[i + 1]) / dx + q_node[i] * dx).collect(),
        off: (0..n - 1).map(|i| -p_mid[i + 1] / dx).collect(),
    };
    let b = Tridiagonal {
        diag: vec![2.0 / dx + dx; n],
        off: vec![-1.0 / dx; n - 1],
    };

    // Every Rayleigh quotient is a weighted mean of P and Q values.
    let floor = p_mid.iter().chain(&q_node).copied().fold(f64::INFINITY, f64::min);
    let ones = vec![1.0; n];
    let ceiling = a.dot(&ones, &ones) / b.dot(&ones, &ones);
    if !(floor.is_finite() && ceiling.is_finite()) {
        return Err(Error::Factorization { shift: floor });
    }
    let margin = |v: f64| 1e-3 * v.abs().max(1.0);
    let (mut lo, mut hi) = (floor - margin(floor), ceiling + margin(ceiling));
    let tight = 1e-6 * lo.abs().max(hi.abs()).max(1.0);
    while hi - lo > tight {
        let mid = 0.5 * (lo + hi);
        if a.shifted(&b, mid).negative_count() == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = lo - tight;
    let m = a.shifted(&b, shift);

    let mut v = ones;
    let mut gamma = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut z = m.solve(&b.mul(&v)).ok_or(Error::Factorization { shift })?;
        let norm = b.dot(&z, &z).sqrt();
        z.iter_mut().for_each(|c| *c /= norm);
        let next = a.dot(&z, &z);
        v = z;
        let change = (next - gamma).abs();
        gamma = next;
        if change <= 1e-12 * gamma.abs() || change <= 1e-15 {
            converged = true;
            break;
        }
    }
    // Fix the sign so the mode is mostly positive.
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|c| *c = -*c);
    }
    Ok(CoercivityEstimate {
        gamma,
        n,
        xs,
        mode: v,
        shift,
        iterations,
        converged,
    })
}

/// `γ` at `n`, `2n` and `4n` interior nodes.
pub fn coercivity_trend<P, Q>(p: P, q: Q, interval: &Interval, n: usize) -> Result<Vec<(usize, f64)>>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    [n, 2 * n, 4 * n]
        .into_iter()
        .map(|k| Ok((k, coercivity_constant(&p, &q, interval, k)?.gamma)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::{positive_solution, JacobiProfile};
    use crate::riccati::{riccati_from_jacobi, riccati_residual};
    use crate::settings::Settings;
    use crate::variational::{coefficients, Problem};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const N: usize = 2048;

    fn unit() -> Interval {
        Interval::unit()
    }

    fn tf(s: &str) -> TestFunction {
        TestFunction::parse(s, unit()).unwrap()
    }

    #[test]
    fn test_function_boundary_check() {
        assert!(TestFunction::parse("x*(1-x)", unit()).is_ok());
        assert!(matches!(
            TestFunction::parse("x", unit()),
            Err(Error::BoundaryValues { .. })
        ));
    }

    #[test]
    fn battery_is_admissible_and_normalized() {
        let i = Interval::new(-0.3, 1.7).unwrap();
        let battery = test_battery(i, N);
        assert_eq!(battery.len(), 12);
        for h in &battery {
            assert!(h.value(i.start()).abs() <= BOUNDARY_TOL, "{}", h.label);
            assert!(h.value(i.end()).abs() <= BOUNDARY_TOL, "{}", h.label);
            assert!((h.h1_norm(N) - 1.0).abs() < 1e-10, "{}", h.label);
        }
    }

    #[test]
    fn omega_examples() {
        let v = omega(|_| 1.0, |_| 0.0, |_| 0.0, &tf("sin(pi*x)"), N);
        assert!((v - PI * PI / 2.0).abs() < 1e-8);
        let v = omega(|_| 1.0, |_| 1.0, |_| 0.0, &tf("x*(1-x)"), N);
        assert!((v - 11.0 / 30.0).abs() < 1e-9);
        let v = omega(|_| 0.0, |_| 0.0, |_| 1.0, &tf("sin(3*x)*x*(1-x)"), N);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn gamma_examples() {
        let h = tf("sin(pi*x)");
        assert!((gamma_form(|_| 1.0, |_| 0.0, &h, N) - PI * PI / 2.0).abs() < 1e-8);
        assert!(gamma_form(|_| 1.0, |_| -PI * PI, &h, N).abs() < 1e-8);
        assert_eq!(gamma_form(|_| 1.0, |_| 3.0, &tf("0"), N), 0.0);
    }

    #[test]
    fn reduce_omega_examples() {
        let c = coefficients(&Problem::coefficients("1", "0", Some("x")).unwrap(), 64).unwrap();
        let (_, q) = reduce_omega(&c);
        assert_eq!(q.eval_x(0.3).unwrap(), -1.0);
        let c = coefficients(&Problem::coefficients("1", "x^2", Some("7")).unwrap(), 64).unwrap();
        let (_, q) = reduce_omega(&c);
        assert_eq!(q.eval_x(0.5).unwrap(), 0.25);
    }

    #[test]
    fn reduction_identity_for_polynomial_r() {
        let c = coefficients(
            &Problem::coefficients("2 + x", "1 - 3*x", Some("0.5 - 2*x + 4*x^3")).unwrap(),
            64,
        )
        .unwrap();
        let (p, q) = reduce_omega(&c);
        let h = tf("x*(1-x)");
        let lhs = omega(|x| c.p_at(x), |x| c.q_raw_at(x), |x| c.r_at(x), &h, N);
        let rhs = gamma_form(|x| p.eval_x(x).unwrap(), |x| q.eval_x(x).unwrap(), &h, N);
        assert!((lhs - rhs).abs() <= 1e-8);
    }

    #[test]
    fn perfect_square_examples() {
        let h = tf("sin(2*pi*x)*x");
        let ps = perfect_square_check(|x| 1.0 + x, |_| 0.0, |_| 0.0, &h, N);
        assert_eq!(ps.lhs, ps.rhs);

        let ps = perfect_square_check(|_| 1.0, |_| -1.0, f64::tan, &tf("x*(1-x)"), N);
        assert!(ps.gap <= 1e-8, "{ps:?}");

        let pos = positive_solution(|_| 1.0, |_| 1.0, &unit(), &Settings::default()).unwrap();
        let w = |x: f64| {
            let s = pos.state(x);
            -s.v / s.u
        };
        let ps = perfect_square_check(|_| 1.0, |_| 1.0, w, &tf("sin(pi*x)"), N);
        assert!(ps.gap <= 1e-6, "{ps:?}");
    }

    #[test]
    fn coercivity_examples() {
        let unit = unit();
        let g = coercivity_constant(|_| 1.0, |_| 0.0, &unit, 1000).unwrap();
        assert!(g.converged);
        assert!((g.gamma - PI * PI / (PI * PI + 1.0)).abs() < 1e-3);
        let g = coercivity_constant(|_| 1.0, |_| 1.0, &unit, 1000).unwrap();
        assert!((g.gamma - 1.0).abs() < 1e-6);
        let g = coercivity_constant(|_| 1.0, |_| -16.0, &unit, 1000).unwrap();
        assert!((g.gamma - (PI * PI - 16.0) / (PI * PI + 1.0)).abs() < 1e-3);
    }

    #[test]
    fn coercivity_mode_reproduces_gamma() {
        let est = coercivity_constant(|x| 1.0 + x, |x| -10.0 * x, &unit(), 400).unwrap();
        let dx = 1.0 / 401.0;
        let v = &est.mode;
        let n = v.len();
        let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
        let (mut num, mut den) = (0.0, 0.0);
        for i in -1..n as isize {
            let d = at(i + 1) - at(i);
            let pm = 1.0 + dx * (i as f64 + 1.5);
            num += pm * d * d / dx;
            den += d * d / dx;
        }
        for (i, &x) in est.xs.iter().enumerate() {
            num += -10.0 * x * v[i] * v[i] * dx;
            den += v[i] * v[i] * dx;
        }
        assert!(((num / den) - est.gamma).abs() <= 1e-10 * est.gamma.abs());
        assert!(est.mode.iter().all(|c| *c > 0.0));
    }

    #[test]
    fn coercivity_trend_converges() {
        let t = coercivity_trend(|_| 1.0, |_| 0.0, &unit(), 100).unwrap();
        let exact = PI * PI / (PI * PI + 1.0);
        let errs: Vec<f64> = t.iter().map(|(_, g)| (g - exact).abs()).collect();
        assert!(errs[1] < errs[0] && errs[2] < errs[1]);
    }

    #[test]
    fn nonnegative_under_bounded_riccati() {
        let s = Settings::default();
        for qc in [-5.0, -2.0, 0.0, 1.0, 5.0] {
            let pos = positive_solution(|_| 1.0, move |_| qc, &unit(), &s).unwrap();
            let w = riccati_from_jacobi(&pos, N).unwrap();
            assert!(riccati_residual(|_| 1.0, move |_| qc, &w) <= 1e-5);
            for h in test_battery(unit(), N) {
                assert!(gamma_form(|_| 1.0, move |_| qc, &h, N) >= -1e-6, "{qc} {}", h.label);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn gamma_is_quadratic(c in -10.0f64..10.0, k in 1usize..6) {
            let h = tf(&format!("sin({k}*pi*x)*(1+x^2)"));
            let base = gamma_form(|x| 1.0 + x, |x| x - 2.0, &h, 512);
            let scaled = gamma_form(|x| 1.0 + x, |x| x - 2.0, &h.scaled(c), 512);
            prop_assert!((scaled - c * c * base).abs() <= 1e-12 * (c * c * base).abs().max(1e-300));
        }
    }
}
