//! End-to-end decision: stationarity, then strict positivity of `P`, then
//! positivity of the Jacobi solution on `(x0, x1]`. Optional cross-checks
//! (coercivity sign, bounded Riccati solution, pointwise Hessian) are attached
//! as diagnostics and never change the verdict.

use log::{debug, warn};
use serde::Serialize;

use crate::error::Result;
use crate::expr::Expr;
use crate::jacobi::{c5_from_solution, integrate_jacobi, positive_solution, C5Outcome};
use crate::quadform::{coercivity_trend, TestFunction};
use crate::riccati::{
    default_initial_values, riccati_from_jacobi, riccati_residual, scan_initial_values,
};
use crate::settings::{Interval, Settings};
use crate::variational::{
    coefficients, euler_residual, objective, pointwise_hessian_check, CoefficientSet, Problem,
    ProblemMode,
};

/// Residual gate for a Riccati solution derived from a positive Jacobi solution.
pub const RICCATI_RESIDUAL_TOL: f64 = 1e-5;
/// Interior nodes of the finest coercivity mesh.
pub const COERCIVITY_NODES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    StrictLocalMinimizer,
    ConjugatePoint { location: f64 },
    LegendreFails { witness: f64, min_p: f64 },
    EulerFails { max_residual: f64 },
    Borderline { location: f64 },
}

impl Verdict {
    /// Process exit code: 0 minimizer, 3 a failed condition, 4 borderline.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::StrictLocalMinimizer => 0,
            Verdict::ConjugatePoint { .. }
            | Verdict::LegendreFails { .. }
            | Verdict::EulerFails { .. } => 3,
            Verdict::Borderline { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub euler_residual_max: Option<f64>,
    pub euler_tol: Option<f64>,
    pub min_p: Option<f64>,
    pub min_p_at: Option<f64>,
    pub c5: Option<C5Outcome>,
    pub first_zero: Option<f64>,
    pub min_u: Option<f64>,
    pub gamma_estimate: Option<f64>,
    pub gamma_trend: Option<Vec<(usize, f64)>>,
    pub riccati_bounded: Option<bool>,
    pub riccati_route: Option<String>,
    pub riccati_residual: Option<f64>,
    pub pointwise_hessian: Option<bool>,
    pub pointwise_hessian_witness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Tool {
    fn default() -> Self {
        Tool {
            name: "secvar",
            version: crate::VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: Tool,
    pub mode: &'static str,
    pub interval: Interval,
    pub settings: Settings,
    pub verdict: Verdict,
    pub diagnostics: Diagnostics,
    pub notes: Vec<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.verdict.exit_code()
    }
}

fn mode_name(prob: &Problem) -> &'static str {
    match prob.mode {
        ProblemMode::Integrand { .. } => "integrand",
        ProblemMode::Coefficients { .. } => "coefficients",
    }
}

/// Runs the gates in order and, with `cross_check`, the advisory oracles.
pub fn check_problem(prob: &Problem, cross_check: bool) -> Result<Report> {
    let settings = prob.settings;
    let n = settings.grid;
    let mut diag = Diagnostics::default();
    let mut notes = prob.notes();
    let report = |verdict, diagnostics, notes| Report {
        tool: Tool::default(),
        mode: mode_name(prob),
        interval: prob.interval,
        settings,
        verdict,
        diagnostics,
        notes,
    };

    if let ProblemMode::Integrand { .. } = prob.mode {
        let e = euler_residual(prob, n)?;
        let tol = e.tolerance(&settings);
        diag.euler_residual_max = Some(e.max_abs);
        diag.euler_tol = Some(tol);
        debug!("Euler residual {} (gate {tol})", e.max_abs);
        if !(e.max_abs <= tol) {
            notes.push("candidate is not stationary; later stages skipped".into());
            let v = Verdict::EulerFails {
                max_residual: e.max_abs,
            };
            return Ok(report(v, diag, notes));
        }
    }

    let coeffs = coefficients(prob, n)?;
    diag.min_p = Some(coeffs.min_p);
    diag.min_p_at = Some(coeffs.min_p_at);
    if let Some(i) = coeffs.p_samples.iter().position(|p| !(*p > 0.0)) {
        notes.push("P is not strictly positive; later stages skipped".into());
        let v = Verdict::LegendreFails {
            witness: coeffs.xs[i],
            min_p: coeffs.min_p,
        };
        return Ok(report(v, diag, notes));
    }

    let (p, q) = (|x| coeffs.p_at(x), |x| coeffs.q_eff_at(x));
    let sol = integrate_jacobi(p, q, &prob.interval, 0.0, 1.0, &settings)?;
    let c5 = c5_from_solution(&sol);
    diag.first_zero = sol.find_zeros(true).first().copied();
    diag.min_u = Some(sol.min_u_after_start);
    diag.c5 = Some(c5.clone());
    let verdict = match c5 {
        C5Outcome::Holds => Verdict::StrictLocalMinimizer,
        C5Outcome::ConjugatePoint { location } => Verdict::ConjugatePoint { location },
        C5Outcome::Borderline { location } => {
            notes.push(format!(
                "Jacobi solution is within the zero band near x = {location}; \
                 strict positivity cannot be decided numerically"
            ));
            Verdict::Borderline { location }
        }
        C5Outcome::NotApplicable { reason } => unreachable!("integrated solution: {reason}"),
    };

    if cross_check {
        run_cross_checks(&coeffs, &prob.interval, &settings, &mut diag, &mut notes);
        note_disagreements(&verdict, &diag, &mut notes);
    }
    Ok(report(verdict, diag, notes))
}

fn run_cross_checks(
    coeffs: &CoefficientSet,
    interval: &Interval,
    settings: &Settings,
    diag: &mut Diagnostics,
    notes: &mut Vec<String>,
) {
    let (p, q) = (|x| coeffs.p_at(x), |x| coeffs.q_eff_at(x));

    match coercivity_trend(p, q, interval, COERCIVITY_NODES / 4) {
        Ok(trend) => {
            diag.gamma_estimate = trend.last().map(|t| t.1);
            diag.gamma_trend = Some(trend);
        }
        Err(e) => notes.push(format!("coercivity cross-check failed: {e}")),
    }

    match positive_solution(p, q, interval, settings)
        .and_then(|pos| riccati_from_jacobi(&pos, settings.grid))
    {
        Ok(w) => {
            let res = riccati_residual(p, q, &w);
            diag.riccati_residual = Some(res);
            diag.riccati_bounded = Some(res <= RICCATI_RESIDUAL_TOL && w.max_abs() < settings.blowup_cap);
            diag.riccati_route = Some("positive Jacobi solution".into());
        }
        Err(e) => {
            debug!("positive solution unavailable: {e}");
            match scan_initial_values(p, q, interval, &default_initial_values(), settings) {
                Ok(scan) => {
                    diag.riccati_bounded = Some(scan.iter().any(|(_, o)| o.is_bounded()));
                    diag.riccati_route = Some("w0 scan over -10..10 (exploratory)".into());
                }
                Err(e) => notes.push(format!("Riccati cross-check failed: {e}")),
            }
        }
    }

    let h = pointwise_hessian_check(coeffs);
    diag.pointwise_hessian = Some(h.holds);
    diag.pointwise_hessian_witness = h.witness;
}

fn note_disagreements(verdict: &Verdict, diag: &Diagnostics, notes: &mut Vec<String>) {
    if matches!(verdict, Verdict::Borderline { .. }) {
        return;
    }
    let minimizer = *verdict == Verdict::StrictLocalMinimizer;
    if let Some(g) = diag.gamma_estimate {
        if (g > 0.0) != minimizer {
            warn!("coercivity estimate {g} disagrees with the Jacobi test");
            notes.push(format!(
                "cross-check disagreement: coercivity estimate {g} vs Jacobi test"
            ));
        }
    }
    if let Some(b) = diag.riccati_bounded {
        if b != minimizer {
            warn!("Riccati boundedness {b} disagrees with the Jacobi test");
            notes.push(format!(
                "cross-check disagreement: Riccati bounded = {b} vs Jacobi test"
            ));
        }
    }
    if diag.pointwise_hessian == Some(true) && !minimizer {
        notes.push("cross-check disagreement: pointwise Hessian is positive definite".into());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub label: String,
    pub eps: f64,
    /// `F(y* + eps h) - F(y*)`.
    pub delta: f64,
}

/// Objective differences along each test direction for each step size.
pub fn perturbation_probe(
    prob: &Problem,
    eps: &[f64],
    battery: &[TestFunction],
) -> Result<Vec<ProbeRow>> {
    let n = prob.settings.grid;
    let candidate = match &prob.mode {
        ProblemMode::Integrand { candidate, .. } => candidate,
        ProblemMode::Coefficients { .. } => {
            return Err(crate::Error::NeedsIntegrand("perturbation_probe"))
        }
    };
    let base = objective(prob, candidate, n)?;
    let mut rows = Vec::with_capacity(eps.len() * battery.len());
    for h in battery {
        for &e in eps {
            let y = candidate.clone().add(Expr::constant(e).mul(h.expr.clone()));
            rows.push(ProbeRow {
                label: h.label.clone(),
                eps: e,
                delta: objective(prob, &y, n)? - base,
            });
        }
    }
    Ok(rows)
}
