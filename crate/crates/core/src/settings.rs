use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::OdeOptions;

/// A finite, nondegenerate interval `[x0, x1]`. Serialized as `[x0, x1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    x0: f64,
    x1: f64,
}

impl Interval {
    pub fn new(x0: f64, x1: f64) -> Result<Self> {
        if !(x0.is_finite() && x1.is_finite()) || x0 >= x1 {
            return Err(Error::InvalidInterval { x0, x1 });
        }
        Ok(Interval { x0, x1 })
    }

    pub fn unit() -> Self {
        Interval { x0: 0.0, x1: 1.0 }
    }

    pub fn start(&self) -> f64 {
        self.x0
    }

    pub fn end(&self) -> f64 {
        self.x1
    }

    pub fn span(&self) -> f64 {
        self.x1 - self.x0
    }

    /// The `i`-th of `n + 1` uniform points; the last one is exactly `x1`.
    pub fn node(&self, i: usize, n: usize) -> f64 {
        if i == n {
            self.x1
        } else {
            self.x0 + self.span() * (i as f64 / n as f64)
        }
    }

    /// `n + 1` uniform points from `x0` to `x1` inclusive.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|i| self.node(i, n)).collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.x0..=self.x1).contains(&x)
    }
}

impl Default for Interval {
    fn default() -> Self {
        Interval::unit()
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.x0, i.x1]
    }
}

/// Tolerances and grid sizes shared by every check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// Number of uniform subintervals for sampling and Simpson quadrature (even).
    pub grid: usize,
    /// Absolute Euler-residual gate. `None` selects `1e-6 * (1 + max |f_yp|)`.
    pub euler_tol: Option<f64>,
    /// Relative zero band for Jacobi solutions, scaled by `max |u|`.
    pub zero_tol: f64,
    /// Riccati solutions exceeding this magnitude are declared blown up.
    pub blowup_cap: f64,
    /// Relative and absolute tolerance of the adaptive integrator.
    pub ode_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            grid: 2048,
            euler_tol: None,
            zero_tol: 1e-9,
            blowup_cap: 1e8,
            ode_tol: 1e-10,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Schema(msg.to_string()));
        if self.grid < 16 || !self.grid.is_multiple_of(2) {
            return bad("settings.grid must be an even integer >= 16");
        }
        if let Some(t) = self.euler_tol {
            if !(t.is_finite() && t > 0.0) {
                return bad("settings.euler_tol must be positive");
            }
        }
        if !(self.zero_tol.is_finite() && self.zero_tol > 0.0) {
            return bad("settings.zero_tol must be positive");
        }
        if !(self.blowup_cap.is_finite() && self.blowup_cap > 0.0) {
            return bad("settings.blowup_cap must be positive");
        }
        if !(self.ode_tol > 0.0 && self.ode_tol < 1.0) {
            return bad("settings.ode_tol must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn ode_options(&self, interval: &Interval) -> OdeOptions {
        OdeOptions {
            rtol: self.ode_tol,
            atol: self.ode_tol,
            max_step: interval.span() / 1024.0,
            ..OdeOptions::default()
        }
    }
}
