//! The Jacobi equation `(P u')' = Q u` as an initial-value problem, zero
//! detection on its dense output, the positivity test on `(x0, x1]`, and the
//! strictly positive solution built from two fundamental solutions.
//!
//! The state is `(u, v)` with `v = P u'`, so `P` is never differentiated:
//! `u' = v / P`, `v' = Q u`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, Termination, Trajectory};
use crate::settings::{Interval, Settings};

/// Bisection stops once the bracket is this narrow.
const BISECTION_WIDTH: f64 = 1e-12;

/// Fails with [`Error::Legendre`] at the first grid point where `P` is not
/// strictly positive (including non-finite values).
pub fn check_legendre<P: Fn(f64) -> f64>(p: P, interval: &Interval, n: usize) -> Result<()> {
    for x in interval.grid(n) {
        let v = p(x);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Legendre { x, p: v });
        }
    }
    Ok(())
}

/// Sign changes and near-zeros of a Jacobi solution on `(x0, x1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ZeroScan {
    /// Transversal zeros strictly inside the interval, increasing.
    pub zeros: Vec<f64>,
    /// Local extrema with `|u|` inside the zero band (no clean sign change).
    pub tangential: Vec<f64>,
    /// `|u(x1)|` lies inside the zero band.
    pub endpoint: bool,
}

/// A solution of the Jacobi equation with its dense interpolant.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    pub interval: Interval,
    pub trajectory: Trajectory<2>,
    pub scan: ZeroScan,
    /// Absolute width of the zero band, `zero_tol * max |u|`.
    pub zero_band: f64,
    pub min_u_after_start: f64,
    pub max_abs_u: f64,
}

/// Values of a Jacobi solution at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiState {
    pub u: f64,
    pub du: f64,
    pub v: f64,
    /// `v'`, which equals `Q u` for an exact solution.
    pub dv: f64,
}

/// Anything that evaluates a Jacobi solution on an interval.
pub trait JacobiProfile {
    fn interval(&self) -> Interval;
    fn state(&self, x: f64) -> JacobiState;

    /// `(x, u, v)` on `n + 1` uniform points.
    fn samples(&self, n: usize) -> Vec<(f64, f64, f64)> {
        self.interval()
            .grid(n)
            .into_iter()
            .map(|x| {
                let s = self.state(x);
                (x, s.u, s.v)
            })
            .collect()
    }
}

impl JacobiProfile for JacobiSolution {
    fn interval(&self) -> Interval {
        self.interval
    }

    fn state(&self, x: f64) -> JacobiState {
        let (y, dy) = self.trajectory.interpolate(x);
        JacobiState {
            u: y[0],
            du: dy[0],
            v: y[1],
            dv: dy[1],
        }
    }
}

impl JacobiSolution {
    pub fn nodes(&self) -> &[f64] {
        &self.trajectory.xs
    }

    pub fn u_at(&self, x: f64) -> f64 {
        self.trajectory.interpolate(x).0[0]
    }

    /// Zero locations in `(x0, x1]`, the right endpoint included when it lies
    /// in the zero band. With `exclude_start = false` a vanishing start value
    /// is reported as well.
    pub fn find_zeros(&self, exclude_start: bool) -> Vec<f64> {
        let mut out = Vec::new();
        if !exclude_start && self.trajectory.ys[0][0].abs() <= self.zero_band {
            out.push(self.interval.start());
        }
        out.extend(&self.scan.zeros);
        if self.scan.endpoint {
            out.push(self.interval.end());
        }
        out
    }
}

/// Integrates `(P u')' = Q u` with `u(x0) = u0`, `u'(x0) = u1`.
pub fn integrate_jacobi<P, Q>(
    p: P,
    q: Q,
    interval: &Interval,
    u0: f64,
    u1: f64,
    settings: &Settings,
) -> Result<JacobiSolution>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    check_legendre(&p, interval, settings.grid)?;
    let (x0, x1) = (interval.start(), interval.end());
    let opts = settings.ode_options(interval);
    let traj = integrate(
        |x, s: &[f64; 2]| [s[1] / p(x), q(x) * s[0]],
        x0,
        x1,
        [u0, p(x0) * u1],
        &opts,
        |_, _| false,
    )?;
    if traj.termination == Termination::StepUnderflow {
        return Err(Error::StepUnderflow {
            what: "Jacobi",
            at: traj.last_x(),
        });
    }
    let max_abs_u = traj.ys.iter().fold(0.0f64, |m, s| m.max(s[0].abs()));
    let min_u_after_start = traj.ys[1..].iter().fold(f64::INFINITY, |m, s| m.min(s[0]));
    let zero_band = settings.zero_tol * max_abs_u;
    let scan = scan_zeros(&traj, zero_band, interval.span());
    Ok(JacobiSolution {
        interval: *interval,
        trajectory: traj,
        scan,
        zero_band,
        min_u_after_start,
        max_abs_u,
    })
}

/// Power-basis coefficients `[d, c, b, a]` of the Hermite cubic of `u` on
/// step `i`, in the local variable `s ∈ [0, 1]`.
fn cubic(traj: &Trajectory<2>, i: usize) -> [f64; 4] {
    let h = traj.xs[i + 1] - traj.xs[i];
    let (ya, yb) = (traj.ys[i][0], traj.ys[i + 1][0]);
    let (fa, fb) = (h * traj.dys[i][0], h * traj.dys[i + 1][0]);
    [
        ya,
        fa,
        3.0 * (yb - ya) - 2.0 * fa - fb,
        2.0 * (ya - yb) + fa + fb,
    ]
}

fn eval_cubic(c: &[f64; 4], s: f64) -> f64 {
    ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
}

/// Roots in `(0, 1)` of the derivative `3a s² + 2b s + c`, increasing.
fn critical_points(c: &[f64; 4]) -> Vec<f64> {
    let (qa, qb, qc) = (3.0 * c[3], 2.0 * c[2], c[1]);
    let mut roots = Vec::with_capacity(2);
    if qa == 0.0 {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let t = -0.5 * (qb + qb.signum() * disc.sqrt());
            if t != 0.0 {
                roots.push(t / qa);
                roots.push(qc / t);
            } else {
                roots.push(0.0);
            }
        }
    }
    roots.retain(|s| *s > 0.0 && *s < 1.0);
    roots.sort_by(f64::total_cmp);
    roots
}

fn bisect(c: &[f64; 4], mut lo: f64, mut hi: f64, width: f64) -> f64 {
    let mut flo = eval_cubic(c, lo);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let fm = eval_cubic(c, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn scan_zeros(traj: &Trajectory<2>, band: f64, span: f64) -> ZeroScan {
    let mut scan = ZeroScan::default();
    let n = traj.xs.len();
    for i in 0..n.saturating_sub(1) {
        let (xa, xb) = (traj.xs[i], traj.xs[i + 1]);
        let h = xb - xa;
        let c = cubic(traj, i);
        let crit = critical_points(&c);
        let mut cuts = Vec::with_capacity(crit.len() + 2);
        cuts.push((0.0, false));
        cuts.extend(crit.iter().map(|&s| (s, true)));
        cuts.push((1.0, false));
        for &(s, is_crit) in &cuts {
            if is_crit && eval_cubic(&c, s).abs() < band {
                push_unique(&mut scan.tangential, xa + s * h);
            }
        }
        for w in cuts.windows(2) {
            let ((sl, cl), (sr, cr)) = (w[0], w[1]);
            let (ul, ur) = (eval_cubic(&c, sl), eval_cubic(&c, sr));
            let shallow = (cl && ul.abs() < band) || (cr && ur.abs() < band);
            if ul * ur < 0.0 && !shallow {
                let s = bisect(&c, sl, sr, BISECTION_WIDTH / h);
                scan.zeros.push(xa + s * h);
            } else if ur == 0.0 && !cr && i + 1 < n - 1 {
                // Exact zero on an interior node.
                push_unique(&mut scan.zeros, xb);
            }
        }
    }

    let x1 = traj.last_x();
    let (u1, du1) = (traj.ys[n - 1][0], traj.dys[n - 1][0]);
    scan.endpoint = u1.abs() <= band;
    if scan.endpoint {
        while let Some(&z) = scan.zeros.last() {
            if (x1 - z) * du1.abs() <= 2.0 * band || x1 - z <= 1e-9 * span {
                scan.zeros.pop();
            } else {
                break;
            }
        }
        scan.tangential.retain(|&t| x1 - t > 1e-9 * span);
    }
    scan
}

fn push_unique(v: &mut Vec<f64>, x: f64) {
    if v.last() != Some(&x) {
        v.push(x);
    }
}

/// Result of the positivity test on `(x0, x1]` for the solution with
/// `u(x0) = 0`, `u'(x0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum C5Outcome {
    Holds,
    ConjugatePoint { location: f64 },
    Borderline { location: f64 },
    NotApplicable { reason: String },
}

impl C5Outcome {
    pub fn holds(&self) -> bool {
        matches!(self, C5Outcome::Holds)
    }
}

/// Classifies an already integrated solution: the earliest event among
/// transversal zeros, tangential markers and an endpoint zero decides.
pub fn c5_from_solution(sol: &JacobiSolution) -> C5Outcome {
    let first_zero = sol.scan.zeros.first().copied();
    let first_touch = sol
        .scan
        .tangential
        .first()
        .copied()
        .or(sol.scan.endpoint.then(|| sol.interval.end()));
    match (first_zero, first_touch) {
        (Some(z), Some(t)) if t < z => C5Outcome::Borderline { location: t },
        (Some(z), _) => C5Outcome::ConjugatePoint { location: z },
        (None, Some(t)) => C5Outcome::Borderline { location: t },
        (None, None) => C5Outcome::Holds,
    }
}

/// Integrates the solution with seeds `(0, 1)` and classifies it.
pub fn check_c5<P, Q>(p: P, q: Q, interval: &Interval, settings: &Settings) -> C5Outcome
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    match integrate_jacobi(p, q, interval, 0.0, 1.0, settings) {
        Ok(sol) => c5_from_solution(&sol),
        Err(e) => C5Outcome::NotApplicable {
            reason: e.to_string(),
        },
    }
}

/// `U0 + m U1 / (2 max|U1|)`, strictly positive on the whole closed interval.
#[derive(Debug, Clone)]
pub struct PositiveSolution {
    pub u0: JacobiSolution,
    pub u1: JacobiSolution,
    pub delta: f64,
    pub m: f64,
    pub u1_max: f64,
    /// Coefficient of `U1` in the combination, `m / (2 u1_max)`.
    pub weight: f64,
    /// Combined values on the settings grid.
    pub combined: Vec<(f64, f64)>,
}

impl JacobiProfile for PositiveSolution {
    fn interval(&self) -> Interval {
        self.u0.interval
    }

    fn state(&self, x: f64) -> JacobiState {
        let (a, b) = (self.u0.state(x), self.u1.state(x));
        let w = self.weight;
        JacobiState {
            u: a.u + w * b.u,
            du: a.du + w * b.du,
            v: a.v + w * b.v,
            dv: a.dv + w * b.dv,
        }
    }
}

/// Builds the strictly positive solution from the fundamental pair with
/// seeds `(0, 1)` and `(1, 0)`.
pub fn positive_solution<P, Q>(
    p: P,
    q: Q,
    interval: &Interval,
    settings: &Settings,
) -> Result<PositiveSolution>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let u0 = integrate_jacobi(&p, &q, interval, 0.0, 1.0, settings)?;
    match c5_from_solution(&u0) {
        C5Outcome::Holds => {}
        other => return Err(Error::C5Fails(format!("{other:?}"))),
    }
    let u1 = integrate_jacobi(&p, &q, interval, 1.0, 0.0, settings)?;
    let grid = interval.grid(settings.grid);
    let u0s: Vec<f64> = grid.iter().map(|&x| u0.u_at(x)).collect();
    let u1s: Vec<f64> = grid.iter().map(|&x| u1.u_at(x)).collect();

    let keep = u1s.iter().take_while(|&&v| v >= 0.5).count();
    if keep == 0 {
        return Err(Error::Construction { at: grid[0] });
    }
    let delta = grid[keep - 1];
    let m = u0s[keep - 1..].iter().copied().fold(f64::INFINITY, f64::min);
    if !(m > 0.0) {
        return Err(Error::Construction { at: delta });
    }
    let u1_max = u1s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let weight = m / (2.0 * u1_max);
    let combined: Vec<(f64, f64)> = grid
        .iter()
        .zip(u0s.iter().zip(&u1s))
        .map(|(&x, (a, b))| (x, a + weight * b))
        .collect();
    if let Some(&(x, _)) = combined.iter().find(|(_, u)| !(*u > 0.0)) {
        return Err(Error::Construction { at: x });
    }
    Ok(PositiveSolution {
        u0,
        u1,
        delta,
        m,
        u1_max,
        weight,
        combined,
    })
}
