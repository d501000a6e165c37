//! Adaptive explicit Runge–Kutta integration (Dormand–Prince 5(4)) with a
//! cubic Hermite interpolant on every accepted step.
//!
//! States are fixed-size arrays; the Jacobi system has two components, the
//! Riccati equation and the integrating-factor ODE have one.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("right-hand side is not finite at the initial point x = {at}")]
    NonFiniteStart { at: f64 },
    #[error("maximum number of steps ({steps}) reached at x = {at}")]
    MaxSteps { at: f64, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_step: f64::INFINITY,
            initial_step: None,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Reached the end of the interval.
    Completed,
    /// The stop predicate fired after the last accepted step.
    Stopped,
    /// The step size fell below the floating-point resolution of `x`.
    StepUnderflow,
}

/// Accepted steps of an integration, with the right-hand side at every node.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub xs: Vec<f64>,
    pub ys: Vec<[f64; N]>,
    pub dys: Vec<[f64; N]>,
    pub termination: Termination,
}

impl<const N: usize> Trajectory<N> {
    pub fn last_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn last_y(&self) -> [f64; N] {
        *self.ys.last().unwrap()
    }

    /// Index `i` of the step `[xs[i], xs[i+1]]` containing `x` (clamped).
    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        if n < 2 {
            return 0;
        }
        match self.xs.partition_point(|&t| t <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value and derivative of the cubic Hermite interpolant at `x`.
    pub fn interpolate(&self, x: f64) -> ([f64; N], [f64; N]) {
        if self.xs.len() < 2 {
            return (self.ys[0], self.dys[0]);
        }
        let i = self.segment(x);
        self.hermite(i, x)
    }

    /// Evaluates the Hermite cubic of step `i` at `x`.
    pub fn hermite(&self, i: usize, x: f64) -> ([f64; N], [f64; N]) {
        let (xa, xb) = (self.xs[i], self.xs[i + 1]);
        let h = xb - xa;
        let s = (x - xa) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let (ya, yb, fa, fb) = (&self.ys[i], &self.ys[i + 1], &self.dys[i], &self.dys[i + 1]);
        let mut y = [0.0; N];
        let mut dy = [0.0; N];
        for k in 0..N {
            y[k] = h00 * ya[k] + h10 * h * fa[k] + h01 * yb[k] + h11 * h * fb[k];
            dy[k] = d00 * ya[k] + d10 * fa[k] + d01 * yb[k] + d11 * fb[k];
        }
        (y, dy)
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Integrates `y' = rhs(x, y)` from `x0` to `x1 > x0`.
///
/// After every accepted step `stop(x, y)` is consulted; returning `true` ends
/// the integration with [`Termination::Stopped`]. Non-finite stage values
/// cause step rejection, so a singularity ends in
/// [`Termination::StepUnderflow`] rather than an error.
pub fn integrate<const N: usize, F, S>(
    mut rhs: F,
    x0: f64,
    x1: f64,
    y0: [f64; N],
    opts: &OdeOptions,
    mut stop: S,
) -> Result<Trajectory<N>, OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N]) -> bool,
{
    let f0 = rhs(x0, &y0);
    if !f0.iter().chain(y0.iter()).all(|v| v.is_finite()) {
        return Err(OdeError::NonFiniteStart { at: x0 });
    }
    let span = x1 - x0;
    let mut traj = Trajectory {
        xs: vec![x0],
        ys: vec![y0],
        dys: vec![f0],
        termination: Termination::Completed,
    };
    let mut h = opts
        .initial_step
        .unwrap_or(1e-3 * span)
        .min(opts.max_step)
        .min(span);
    let (mut x, mut y, mut f) = (x0, y0, f0);
    let mut k = [[0.0; N]; 7];
    let mut steps = 0usize;

    while x < x1 {
        if steps >= opts.max_steps {
            return Err(OdeError::MaxSteps { at: x, steps });
        }
        steps += 1;
        let last = x + h >= x1;
        if last {
            h = x1 - x;
        }
        if h <= 8.0 * f64::EPSILON * x.abs().max(span) {
            traj.termination = Termination::StepUnderflow;
            return Ok(traj);
        }

        k[0] = f;
        let mut y_new = y;
        let mut finite = true;
        for s in 1..7 {
            let mut ys = y;
            for (c, yc) in ys.iter_mut().enumerate() {
                *yc += h * (0..s).map(|j| A[s][j] * k[j][c]).sum::<f64>();
            }
            k[s] = rhs(x + C[s] * h, &ys);
            // The last stage sits at the 5th-order solution (FSAL).
            if s == 6 {
                y_new = ys;
            }
            finite &= k[s].iter().all(|v| v.is_finite()) && ys.iter().all(|v| v.is_finite());
        }

        let err = if finite {
            let mut acc = 0.0;
            for c in 0..N {
                let e: f64 = h * (0..7).map(|j| E[j] * k[j][c]).sum::<f64>();
                let sc = opts.atol + opts.rtol * y[c].abs().max(y_new[c].abs());
                acc += (e / sc).powi(2);
            }
            (acc / N as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            x = if last { x1 } else { x + h };
            y = y_new;
            f = k[6];
            traj.xs.push(x);
            traj.ys.push(y);
            traj.dys.push(f);
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            h = (h * factor).min(opts.max_step);
            if stop(x, &y) {
                traj.termination = Termination::Stopped;
                return Ok(traj);
            }
        } else {
            let factor = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0)
            } else {
                0.25
            };
            h *= factor;
        }
    }
    Ok(traj)
}
