//! The variational problem `min ∫ f(y', y, x) dx`, its stationarity check and
//! the coefficients of the second variation.
//!
//! Along a candidate `y*` the second variation has the form
//! `∫ P h'² + 2 R h' h + Q h² dx` with `P = f_yp,yp`, `R = f_yp,y` and
//! `Q = f_y,y`. When `R` is differentiable, integrating the cross term by parts
//! folds it into `Q`, leaving `Q_eff = Q - R'` as the coefficient of the
//! Jacobi equation. All of these are built symbolically as expressions in `x`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{hessian_pq, SecondPartials};
use crate::error::{Error, Result};
use crate::expr::{Expr, Func, VAR_X, VAR_Y, VAR_YP};
use crate::quad::try_simpson;
use crate::settings::{Interval, Settings};

/// Problem file schema.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrand: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<String>,
    #[serde(default)]
    pub interval: Interval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<Overrides>,
    #[serde(default)]
    pub settings: Settings,
}

/// Direct coefficient overrides, bypassing the integrand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemMode {
    /// Integrand `f(yp, y, x)` with a closed-form candidate `y*(x)`.
    Integrand { integrand: Expr, candidate: Expr },
    /// Coefficients of the second variation given directly. `q` is the raw
    /// coefficient; when `r` is present the effective one is `q - r'`.
    Coefficients { p: Expr, q: Expr, r: Option<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub mode: ProblemMode,
    pub interval: Interval,
    pub settings: Settings,
}

fn parse_field(field: &str, text: &str, allowed: &[&str]) -> Result<Expr> {
    let e = Expr::parse(text).map_err(|source| Error::Expression {
        field: field.to_string(),
        source,
    })?;
    if let Some(bad) = e.variables().into_iter().find(|v| !allowed.contains(&v.as_str())) {
        return Err(Error::Schema(format!(
            "{field} may only use {allowed:?}, found `{bad}`"
        )));
    }
    Ok(e)
}

impl Problem {
    pub fn from_document(doc: &ProblemDocument) -> Result<Problem> {
        doc.settings.validate()?;
        let overrides = doc.overrides.as_ref().filter(|o| {
            o.p.is_some() || o.q.is_some() || o.r.is_some()
        });
        let mode = match (&doc.integrand, &doc.candidate, overrides) {
            (Some(_), _, Some(_)) => {
                return Err(Error::Schema(
                    "ambiguous mode: give either an integrand or coefficient overrides, not both"
                        .into(),
                ))
            }
            (Some(f), Some(y), None) => ProblemMode::Integrand {
                integrand: parse_field("integrand", f, &[VAR_YP, VAR_Y, VAR_X])?,
                candidate: parse_field("candidate", y, &[VAR_X])?,
            },
            (Some(_), None, None) => {
                return Err(Error::Schema("integrand given without a candidate".into()))
            }
            (None, Some(_), _) => {
                return Err(Error::Schema("candidate given without an integrand".into()))
            }
            (None, None, Some(o)) => {
                let (Some(p), Some(q)) = (&o.p, &o.q) else {
                    return Err(Error::Schema("overrides need at least P and Q".into()));
                };
                ProblemMode::Coefficients {
                    p: parse_field("overrides.P", p, &[VAR_X])?,
                    q: parse_field("overrides.Q", q, &[VAR_X])?,
                    r: o
                        .r
                        .as_deref()
                        .map(|r| parse_field("overrides.R", r, &[VAR_X]))
                        .transpose()?,
                }
            }
            (None, None, None) => {
                return Err(Error::Schema(
                    "need an integrand and candidate, or overrides with P and Q".into(),
                ))
            }
        };
        Ok(Problem {
            mode,
            interval: doc.interval,
            settings: doc.settings,
        })
    }

    pub fn from_json(text: &str) -> Result<Problem> {
        let doc: ProblemDocument = serde_json::from_str(text)?;
        Problem::from_document(&doc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Problem> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Problem::from_json(&text)
    }

    /// Problem in integrand mode on `[0, 1]` with default settings.
    pub fn integrand(integrand: &str, candidate: &str) -> Result<Problem> {
        Problem::from_document(&ProblemDocument {
            integrand: Some(integrand.into()),
            candidate: Some(candidate.into()),
            ..Default::default()
        })
    }

    /// Problem in coefficient mode on `[0, 1]` with default settings.
    pub fn coefficients(p: &str, q: &str, r: Option<&str>) -> Result<Problem> {
        Problem::from_document(&ProblemDocument {
            overrides: Some(Overrides {
                p: Some(p.into()),
                q: Some(q.into()),
                r: r.map(Into::into),
            }),
            ..Default::default()
        })
    }

    pub fn with_interval(mut self, interval: Interval) -> Self {
        self.interval = interval;
        self
    }

    pub fn with_settings(mut self, settings: Settings) -> Self {
        self.settings = settings;
        self
    }

    fn integrand_parts(&self, op: &'static str) -> Result<(&Expr, &Expr)> {
        match &self.mode {
            ProblemMode::Integrand {
                integrand,
                candidate,
            } => Ok((integrand, candidate)),
            ProblemMode::Coefficients { .. } => Err(Error::NeedsIntegrand(op)),
        }
    }

    /// Human-readable caveats about the input that do not change the verdict.
    pub fn notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        let exprs: Vec<&Expr> = match &self.mode {
            ProblemMode::Integrand {
                integrand,
                candidate,
            } => {
                let (a, b) = (self.interval.start(), self.interval.end());
                let ends = (candidate.eval_x(a), candidate.eval_x(b));
                if let (Ok(ya), Ok(yb)) = ends {
                    if ya != 0.0 || yb != 0.0 {
                        notes.push(format!(
                            "candidate has nonzero boundary values y({a}) = {ya}, y({b}) = {yb}; \
                             the verdict refers to the fixed-endpoint problem with these values"
                        ));
                    }
                }
                vec![integrand, candidate]
            }
            ProblemMode::Coefficients { p, q, r } => {
                notes.push(
                    "coefficient overrides given: Euler equation not checked".to_string(),
                );
                let mut v = vec![p, q];
                v.extend(r.as_ref());
                v
            }
        };
        if exprs.iter().any(|e| e.contains_func(Func::Abs) || e.contains_func(Func::Sign)) {
            notes.push(
                "input contains abs/sign: smoothness assumptions are not verified and \
                 d|t|/dt is taken as 0 at t = 0"
                    .to_string(),
            );
        }
        notes
    }
}

/// Substitutes the candidate and its derivative for `y` and `yp`.
fn along(e: &Expr, candidate: &Expr, dcandidate: &Expr) -> Expr {
    e.substitute(VAR_YP, dcandidate).substitute(VAR_Y, candidate)
}

fn sample(e: &Expr, xs: &[f64], what: &str) -> Result<Vec<f64>> {
    xs.iter()
        .map(|&x| {
            e.eval_x(x)
                .map_err(|err| Error::eval(format!("{what} at x = {x}"), err))
        })
        .collect()
}

/// Composite Simpson approximation of `F(y) = ∫ f(y', y, x) dx`.
pub fn objective(prob: &Problem, y: &Expr, n: usize) -> Result<f64> {
    let (f, _) = prob.integrand_parts("objective")?;
    let dy = y.differentiate(VAR_X);
    let g = along(f, y, &dy);
    try_simpson(
        |x| {
            g.eval_x(x)
                .map_err(|e| Error::eval(format!("integrand at x = {x}"), e))
        },
        prob.interval.start(),
        prob.interval.end(),
        n,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerResidual {
    pub xs: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
    /// `max |f_yp|` along the candidate, the scale of the default gate.
    pub fp_scale: f64,
}

impl EulerResidual {
    /// The gate actually applied: the explicit setting or `1e-6 * (1 + fp_scale)`.
    pub fn tolerance(&self, settings: &Settings) -> f64 {
        settings.euler_tol.unwrap_or(1e-6 * (1.0 + self.fp_scale))
    }
}

/// `d/dx f_yp(y*', y*, x) - f_y(y*', y*, x)` on `n + 1` uniform points.
pub fn euler_residual(prob: &Problem, n: usize) -> Result<EulerResidual> {
    let (f, y) = prob.integrand_parts("euler_residual")?;
    let dy = y.differentiate(VAR_X);
    let fp = along(&f.differentiate(VAR_YP), y, &dy);
    let fy = along(&f.differentiate(VAR_Y), y, &dy);
    let residual_expr = fp.differentiate(VAR_X).sub(fy);
    let xs = prob.interval.grid(n);
    let residual = sample(&residual_expr, &xs, "Euler residual")?;
    let fp_samples = sample(&fp, &xs, "f_yp along the candidate")?;
    let max_abs = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let fp_scale = fp_samples.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(EulerResidual {
        xs,
        residual,
        max_abs,
        fp_scale,
    })
}

/// Second-variation coefficients along the candidate, as expressions in `x`
/// and sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub interval: Interval,
    pub p: Expr,
    pub r: Expr,
    pub q_raw: Expr,
    pub q_eff: Expr,
    pub xs: Vec<f64>,
    pub p_samples: Vec<f64>,
    pub r_samples: Vec<f64>,
    pub q_raw_samples: Vec<f64>,
    pub q_eff_samples: Vec<f64>,
    /// Minimum of the `P` samples (the Legendre margin).
    pub min_p: f64,
    pub min_p_at: f64,
}

impl CoefficientSet {
    /// Builds the set from `P`, raw `Q` and `R` in `x`; `R'` is symbolic.
    pub fn from_exprs(p: Expr, q_raw: Expr, r: Expr, interval: Interval, n: usize) -> Result<Self> {
        let q_eff = reduce_cross_term(&q_raw, &r);
        let xs = interval.grid(n);
        let p_samples = sample(&p, &xs, "P")?;
        let r_samples = sample(&r, &xs, "R")?;
        let q_raw_samples = sample(&q_raw, &xs, "Q")?;
        let q_eff_samples = sample(&q_eff, &xs, "Q - R'")?;
        let (min_at, min_p) = p_samples
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        Ok(CoefficientSet {
            interval,
            min_p_at: xs[min_at],
            p,
            r,
            q_raw,
            q_eff,
            xs,
            p_samples,
            r_samples,
            q_raw_samples,
            q_eff_samples,
            min_p,
        })
    }

    /// `P(x)`; NaN outside the domain of the expression.
    pub fn p_at(&self, x: f64) -> f64 {
        self.p.eval_x(x).unwrap_or(f64::NAN)
    }

    pub fn r_at(&self, x: f64) -> f64 {
        self.r.eval_x(x).unwrap_or(f64::NAN)
    }

    pub fn q_raw_at(&self, x: f64) -> f64 {
        self.q_raw.eval_x(x).unwrap_or(f64::NAN)
    }

    pub fn q_eff_at(&self, x: f64) -> f64 {
        self.q_eff.eval_x(x).unwrap_or(f64::NAN)
    }
}

/// `Q - R'` with `R'` obtained symbolically.
pub fn reduce_cross_term(q_raw: &Expr, r: &Expr) -> Expr {
    q_raw.clone().sub(r.differentiate(VAR_X))
}

/// `P = f_pp`, `R = f_py`, `Q = f_yy` along the candidate, plus `Q - R'`.
pub fn coefficients(prob: &Problem, n: usize) -> Result<CoefficientSet> {
    let (p, q_raw, r) = match &prob.mode {
        ProblemMode::Integrand {
            integrand: f,
            candidate: y,
        } => {
            let dy = y.differentiate(VAR_X);
            let fp = f.differentiate(VAR_YP);
            let fy = f.differentiate(VAR_Y);
            (
                along(&fp.differentiate(VAR_YP), y, &dy),
                along(&fy.differentiate(VAR_Y), y, &dy),
                along(&fp.differentiate(VAR_Y), y, &dy),
            )
        }
        ProblemMode::Coefficients { p, q, r } => (
            p.clone(),
            q.clone(),
            r.clone().unwrap_or(Expr::Const(0.0)),
        ),
    };
    CoefficientSet::from_exprs(p, q_raw, r, prob.interval, n)
}

/// Hessian entries along the candidate from hyper-dual evaluation, for
/// cross-checking the symbolic coefficients.
pub fn hessian_along_candidate(prob: &Problem, n: usize) -> Result<Vec<(f64, SecondPartials)>> {
    let (f, y) = prob.integrand_parts("hessian_along_candidate")?;
    let dy = y.differentiate(VAR_X);
    prob.interval
        .grid(n)
        .into_iter()
        .map(|x| {
            let ctx = |what: &str| format!("{what} at x = {x}");
            let yv = y.eval_x(x).map_err(|e| Error::eval(ctx("candidate"), e))?;
            let pv = dy.eval_x(x).map_err(|e| Error::eval(ctx("candidate slope"), e))?;
            let h = hessian_pq(f, pv, yv, x).map_err(|e| Error::eval(ctx("Hessian"), e))?;
            Ok((x, h))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianCheck {
    pub holds: bool,
    /// First sample where the 2x2 Hessian is not positive definite.
    pub witness: Option<f64>,
}

/// Strict positive definiteness of `[[P, R], [R, Q]]` at every sample.
pub fn pointwise_hessian_check(c: &CoefficientSet) -> HessianCheck {
    let witness = c
        .xs
        .iter()
        .zip(c.p_samples.iter().zip(c.r_samples.iter().zip(&c.q_raw_samples)))
        .find(|(_, (p, (r, q)))| !(**p > 0.0 && *p * *q - *r * *r > 0.0))
        .map(|(x, _)| *x);
    HessianCheck {
        holds: witness.is_none(),
        witness,
    }
}
