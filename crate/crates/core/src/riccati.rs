//! The Riccati equation `w' = w²/P - Q`: direct integration with blow-up
//! detection, the bounded solution `w = -P u'/u` obtained from a positive
//! Jacobi solution, and the integrating-factor reconstruction of `h` from
//! `r = h' + w h / P`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jacobi::{check_legendre, JacobiProfile};
use crate::ode::{integrate, Termination};
use crate::quad::simpson_samples;
use crate::settings::{Interval, Settings};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiccatiOutcome {
    Bounded {
        xs: Vec<f64>,
        w: Vec<f64>,
        max_abs_w: f64,
    },
    Blowup {
        location: f64,
        last_value: f64,
    },
}

impl RiccatiOutcome {
    pub fn is_bounded(&self) -> bool {
        matches!(self, RiccatiOutcome::Bounded { .. })
    }
}

/// Integrates `w' = w²/P - Q` from `w(x0) = w0`. Exceeding the blow-up cap or
/// a collapsing step size both count as blow-up at the last accepted step.
pub fn integrate_riccati<P, Q>(
    p: P,
    q: Q,
    interval: &Interval,
    w0: f64,
    settings: &Settings,
) -> Result<RiccatiOutcome>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    check_legendre(&p, interval, settings.grid)?;
    let cap = settings.blowup_cap;
    let traj = integrate(
        |x, w: &[f64; 1]| [w[0] * w[0] / p(x) - q(x)],
        interval.start(),
        interval.end(),
        [w0],
        &settings.ode_options(interval),
        |_, w| w[0].abs() > cap,
    )?;
    if traj.termination != Termination::Completed {
        return Ok(RiccatiOutcome::Blowup {
            location: traj.last_x(),
            last_value: traj.last_y()[0],
        });
    }
    let xs = interval.grid(settings.grid);
    let w: Vec<f64> = xs.iter().map(|&x| traj.interpolate(x).0[0]).collect();
    let max_abs_w = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(RiccatiOutcome::Bounded { xs, w, max_abs_w })
}

/// Outcome of integrating from each starting value in `w0s`.
pub fn scan_initial_values<P, Q>(
    p: P,
    q: Q,
    interval: &Interval,
    w0s: &[f64],
    settings: &Settings,
) -> Result<Vec<(f64, RiccatiOutcome)>>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    w0s.iter()
        .map(|&w0| Ok((w0, integrate_riccati(&p, &q, interval, w0, settings)?)))
        .collect()
}

/// The integers `-10..=10`, the default exploratory scan.
pub fn default_initial_values() -> Vec<f64> {
    (-10..=10).map(f64::from).collect()
}

/// Samples of a Riccati solution on a possibly nonuniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiSamples {
    pub xs: Vec<f64>,
    pub w: Vec<f64>,
}

impl RiccatiSamples {
    pub fn max_abs(&self) -> f64 {
        self.w.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolation between samples.
    pub fn at(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&t| t <= x).clamp(1, self.xs.len() - 1);
        let (xa, xb) = (self.xs[k - 1], self.xs[k]);
        let s = ((x - xa) / (xb - xa)).clamp(0.0, 1.0);
        self.w[k - 1] + s * (self.w[k] - self.w[k - 1])
    }
}

/// `w = -P u'/u = -v/u` from a strictly positive Jacobi solution.
///
/// Samples are graded: the spacing is at most `L / n` and at most
/// `1e-3 |u / u'|`, so regions where `u` is small are resolved finely.
pub fn riccati_from_jacobi<J: JacobiProfile + ?Sized>(u: &J, n: usize) -> Result<RiccatiSamples> {
    let interval = u.interval();
    let (x0, x1) = (interval.start(), interval.end());
    let coarse = interval.span() / n as f64;
    let mut xs = Vec::with_capacity(n + 1);
    let mut w = Vec::with_capacity(n + 1);
    let mut x = x0;
    loop {
        let st = u.state(x);
        if !(st.u > 0.0) {
            return Err(Error::NonPositive { x, u: st.u });
        }
        xs.push(x);
        w.push(-st.v / st.u);
        if x >= x1 {
            break;
        }
        let fine = if st.du == 0.0 {
            coarse
        } else {
            1e-3 * (st.u / st.du).abs()
        };
        let next = x + coarse.min(fine);
        // Avoid a sliver before the endpoint.
        x = if next >= x1 - 1e-3 * coarse.min(fine) { x1 } else { next };
    }
    Ok(RiccatiSamples { xs, w })
}

/// First-derivative weights at `z` for the stencil `x` (Lagrange form).
fn derivative_weights(z: f64, x: &[f64; 5]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for j in 0..5 {
        let mut sum = 0.0;
        for k in (0..5).filter(|&k| k != j) {
            let mut prod = 1.0 / (x[j] - x[k]);
            for m in (0..5).filter(|&m| m != j && m != k) {
                prod *= (z - x[m]) / (x[j] - x[m]);
            }
            sum += prod;
        }
        out[j] = sum;
    }
    out
}

/// `max |w' - w²/P + Q|` over samples with two neighbours on each side, the
/// derivative taken from a five-point centered stencil.
pub fn riccati_residual<P, Q>(p: P, q: Q, samples: &RiccatiSamples) -> f64
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let (xs, w) = (&samples.xs, &samples.w);
    assert!(xs.len() >= 5, "riccati_residual needs at least five samples");
    (2..xs.len() - 2)
        .map(|i| {
            let stencil = [xs[i - 2], xs[i - 1], xs[i], xs[i + 1], xs[i + 2]];
            let c = derivative_weights(xs[i], &stencil);
            let dw: f64 = (0..5).map(|j| c[j] * w[i - 2 + j]).sum();
            (dw - w[i] * w[i] / p(xs[i]) + q(xs[i])).abs()
        })
        .fold(0.0, f64::max)
}

/// `h` recovered from `r` on a uniform grid, with the certified bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconstruction {
    pub xs: Vec<f64>,
    pub h: Vec<f64>,
    /// `exp(∫ |w|/P) * max(1, L/√2)`, so that `‖h‖ ≤ c ‖r‖` in L².
    pub c: f64,
    pub h_norm: f64,
    pub r_norm: f64,
}

/// Solves `h' = r - w h / P`, `h(x0) = 0` (the integrating-factor formula in
/// differential form) and samples `h` on `n + 1` uniform points.
pub fn reconstruct_h<R, W, P>(
    r: R,
    w: W,
    p: P,
    interval: &Interval,
    n: usize,
    settings: &Settings,
) -> Result<Reconstruction>
where
    R: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let n = (n.max(2) + 1) & !1;
    let traj = integrate(
        |x, h: &[f64; 1]| [r(x) - w(x) * h[0] / p(x)],
        interval.start(),
        interval.end(),
        [0.0],
        &settings.ode_options(interval),
        |_, _| false,
    )?;
    if traj.termination == Termination::StepUnderflow {
        return Err(Error::StepUnderflow {
            what: "integrating-factor",
            at: traj.last_x(),
        });
    }
    let xs = interval.grid(n);
    let step = interval.span() / n as f64;
    let h: Vec<f64> = xs.iter().map(|&x| traj.interpolate(x).0[0]).collect();
    let sq = |v: &[f64]| simpson_samples(&v.iter().map(|a| a * a).collect::<Vec<_>>(), step).sqrt();
    let rs: Vec<f64> = xs.iter().map(|&x| r(x)).collect();
    let ratio: Vec<f64> = xs.iter().map(|&x| (w(x) / p(x)).abs()).collect();
    let factor = simpson_samples(&ratio, step).exp();
    let c = factor * (interval.span() / std::f64::consts::SQRT_2).max(1.0);
    Ok(Reconstruction {
        h_norm: sq(&h),
        r_norm: sq(&rs),
        xs,
        h,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::{integrate_jacobi, positive_solution};
    use std::f64::consts::PI;

    fn unit() -> Interval {
        Interval::unit()
    }

    #[test]
    fn integrate_examples() {
        let s = Settings::default();
        match integrate_riccati(|_| 1.0, |_| 0.0, &unit(), 0.0, &s).unwrap() {
            RiccatiOutcome::Bounded { w, max_abs_w, .. } => {
                assert!(w.iter().all(|v| *v == 0.0));
                assert_eq!(max_abs_w, 0.0);
            }
            other => panic!("{other:?}"),
        }
        match integrate_riccati(|_| 1.0, |_| -1.0, &unit(), 0.0, &s).unwrap() {
            RiccatiOutcome::Bounded { w, .. } => {
                assert!((w.last().unwrap() - 1f64.tan()).abs() < 1e-7);
            }
            other => panic!("{other:?}"),
        }
        match integrate_riccati(|_| 1.0, |_| -16.0, &unit(), 0.0, &s).unwrap() {
            RiccatiOutcome::Blowup { location, last_value } => {
                assert!((location - PI / 8.0).abs() < 1e-4);
                assert!(last_value.abs() > s.blowup_cap || location > 0.39);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scan_finds_bounded_start_for_negative_q() {
        let out = scan_initial_values(|_| 1.0, |_| -2.0, &unit(), &default_initial_values(), &Settings::default())
            .unwrap();
        assert_eq!(out.len(), 21);
        assert!(out.iter().any(|(_, o)| o.is_bounded()));
        let out = scan_initial_values(|_| 1.0, |_| -20.0, &unit(), &default_initial_values(), &Settings::default())
            .unwrap();
        assert!(out.iter().all(|(_, o)| !o.is_bounded()));
    }

    #[test]
    fn from_jacobi_examples() {
        let s = Settings::default();
        let ps = positive_solution(|_| 1.0, |_| 0.0, &unit(), &s).unwrap();
        let r = riccati_from_jacobi(&ps, 2048).unwrap();
        assert!((r.w[0] + 2.0).abs() < 1e-9);
        for (x, w) in r.xs.iter().zip(&r.w) {
            assert!((w + 1.0 / (x + 0.5)).abs() < 1e-9);
        }

        let cos = integrate_jacobi(|_| 1.0, |_| -1.0, &unit(), 1.0, 0.0, &s).unwrap();
        let r = riccati_from_jacobi(&cos, 2048).unwrap();
        for (x, w) in r.xs.iter().zip(&r.w) {
            assert!((w - x.tan()).abs() < 1e-8);
        }

        let one = integrate_jacobi(|_| 1.0, |_| 0.0, &unit(), 1.0, 0.0, &s).unwrap();
        let r = riccati_from_jacobi(&one, 64).unwrap();
        assert!(r.w.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn from_jacobi_rejects_vanishing_u() {
        let s = Settings::default();
        let u = integrate_jacobi(|_| 1.0, |_| 0.0, &unit(), 0.0, 1.0, &s).unwrap();
        assert!(matches!(riccati_from_jacobi(&u, 64), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn residual_examples() {
        let xs = unit().grid(2048);
        let zero = RiccatiSamples { w: vec![0.0; xs.len()], xs: xs.clone() };
        assert_eq!(riccati_residual(|_| 1.0, |_| 0.0, &zero), 0.0);

        let tan = RiccatiSamples { w: xs.iter().map(|x| x.tan()).collect(), xs };
        assert!(riccati_residual(|_| 1.0, |_| -1.0, &tan) <= 1e-5);

        let ps = positive_solution(|_| 1.0, |_| 1.0, &unit(), &Settings::default()).unwrap();
        let r = riccati_from_jacobi(&ps, 2048).unwrap();
        assert!(riccati_residual(|_| 1.0, |_| 1.0, &r) <= 1e-5);
    }

    #[test]
    fn residual_near_knife_edge() {
        let q = -PI * PI + 0.1;
        let ps = positive_solution(|_| 1.0, move |_| q, &unit(), &Settings::default()).unwrap();
        let r = riccati_from_jacobi(&ps, 2048).unwrap();
        assert!(riccati_residual(|_| 1.0, move |_| q, &r) <= 1e-5);
    }

    #[test]
    fn derivative_weights_are_exact_for_quartics() {
        let x = [0.0, 0.1, 0.25, 0.3, 0.7];
        let c = derivative_weights(0.25, &x);
        let d: f64 = (0..5).map(|j| c[j] * x[j].powi(4)).sum();
        assert!((d - 4.0 * 0.25f64.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_examples() {
        let s = Settings::default();
        let r = reconstruct_h(|_| 1.0, |_| 0.0, |_| 1.0, &unit(), 64, &s).unwrap();
        for (x, h) in r.xs.iter().zip(&r.h) {
            assert!((h - x).abs() < 1e-12);
        }
        let r = reconstruct_h(|_| 1.0, |_| 1.0, |_| 1.0, &unit(), 64, &s).unwrap();
        assert!((r.h.last().unwrap() - 0.632121).abs() < 1e-6);
        for (x, h) in r.xs.iter().zip(&r.h) {
            assert!((h - (1.0 - (-x).exp())).abs() < 1e-10);
        }
        assert!((r.c - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_round_trip() {
        // h = sin(pi x) x, w = tan(x), P = 1 + x
        let h = |x: f64| (PI * x).sin() * x;
        let dh = |x: f64| PI * (PI * x).cos() * x + (PI * x).sin();
        let p = |x: f64| 1.0 + x;
        let r = |x: f64| dh(x) + x.tan() * h(x) / p(x);
        let rec = reconstruct_h(r, f64::tan, p, &unit(), 2048, &Settings::default()).unwrap();
        let err = rec.xs.iter().zip(&rec.h).map(|(x, v)| (v - h(*x)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(rec.h_norm <= rec.c * rec.r_norm);
    }
}
