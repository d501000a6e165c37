//! `secvar`: command-line front end for the second-variation verifier.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use secvar::jacobi::{integrate_jacobi, positive_solution, JacobiProfile};
use secvar::quadform::{coercivity_trend, gamma_form, perfect_square_check, test_battery};
use secvar::riccati::{integrate_riccati, riccati_from_jacobi, RiccatiOutcome};
use secvar::variational::{coefficients, CoefficientSet};
use secvar::verdict::COERCIVITY_NODES;
use secvar::{check_problem, Problem};

/// Exit code for unreadable or invalid input.
const EXIT_INPUT: u8 = 2;
/// Exit code when the requested object does not exist (blow-up, no positive solution).
const EXIT_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "secvar", version, about = "Verify strict local minimizers of 1D variational problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Full verdict report as JSON.
    Check {
        #[command(flatten)]
        common: Common,
        /// Attach coercivity, Riccati and pointwise-Hessian cross-checks.
        #[arg(long)]
        cross_check: bool,
    },
    /// Jacobi solution with u(x0) = 0, u'(x0) = 1 sampled as x,u,v (v = P u').
    Jacobi {
        #[command(flatten)]
        common: Common,
    },
    /// Riccati solution sampled as x,w.
    Riccati {
        #[command(flatten)]
        common: Common,
        /// Integrate from this initial value instead of deriving w from the
        /// positive Jacobi solution (exploratory).
        #[arg(long, allow_negative_numbers = true)]
        w0: Option<f64>,
    },
    /// Quadratic-form values on the test battery and the coercivity estimate.
    Gamma {
        #[command(flatten)]
        common: Common,
    },
    /// Conjugate points in (x0, x1] as a JSON list.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Pointwise Hessian entries and determinant as x,P,R,Q_raw,det.
    Hessian {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Problem file (JSON).
    problem: PathBuf,
    /// Number of uniform subintervals (even, at least 16).
    #[arg(long)]
    grid: Option<usize>,
    /// Relative and absolute tolerance of the ODE integrator.
    #[arg(long)]
    tol: Option<f64>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

struct Output {
    text: String,
    code: u8,
    message: Option<String>,
}

impl Output {
    fn ok(text: String) -> Self {
        Output {
            text,
            code: 0,
            message: None,
        }
    }
}

fn load(common: &Common) -> Result<Problem, String> {
    let mut prob = Problem::from_path(&common.problem).map_err(|e| e.to_string())?;
    if let Some(g) = common.grid {
        prob.settings.grid = g;
    }
    if let Some(t) = common.tol {
        prob.settings.ode_tol = t;
    }
    prob.settings.validate().map_err(|e| e.to_string())?;
    Ok(prob)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = format!("{header}\n");
    for row in rows {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn rows_json(keys: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let list: Vec<Value> = rows
        .into_iter()
        .map(|r| {
            let obj = keys.iter().zip(r).map(|(k, v)| (k.to_string(), json!(v)));
            Value::Object(obj.collect())
        })
        .collect();
    pretty(&Value::Array(list))
}

fn table(format: Format, keys: &[&str], rows: Vec<Vec<f64>>) -> String {
    match format {
        Format::Csv => csv(&keys.join(","), rows),
        Format::Json => rows_json(keys, rows),
    }
}

fn json_only(common: &Common, what: &str) -> Result<(), String> {
    match common.format {
        Some(Format::Csv) => Err(format!("{what} output is JSON only")),
        _ => Ok(()),
    }
}

fn coeffs(prob: &Problem) -> Result<CoefficientSet, String> {
    coefficients(prob, prob.settings.grid).map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Result<(Output, &Common), String> {
    let out = match &cli.command {
        Command::Check { common, cross_check } => {
            json_only(common, "check")?;
            let prob = load(common)?;
            let report = check_problem(&prob, *cross_check).map_err(|e| e.to_string())?;
            let value = serde_json::to_value(&report).map_err(|e| e.to_string())?;
            let out = Output {
                text: pretty(&value),
                code: report.exit_code() as u8,
                message: None,
            };
            (out, common)
        }
        Command::Jacobi { common } => {
            let prob = load(common)?;
            let c = coeffs(&prob)?;
            let sol = integrate_jacobi(
                |x| c.p_at(x),
                |x| c.q_eff_at(x),
                &prob.interval,
                0.0,
                1.0,
                &prob.settings,
            )
            .map_err(|e| e.to_string())?;
            let rows = sol
                .samples(prob.settings.grid)
                .into_iter()
                .map(|(x, u, v)| vec![x, u, v])
                .collect();
            let fmt = common.format.unwrap_or(Format::Csv);
            (Output::ok(table(fmt, &["x", "u", "v"], rows)), common)
        }
        Command::Riccati { common, w0 } => (riccati(common, *w0)?, common),
        Command::Gamma { common } => {
            json_only(common, "gamma")?;
            (gamma(common)?, common)
        }
        Command::Scan { common } => {
            json_only(common, "scan")?;
            let prob = load(common)?;
            let c = coeffs(&prob)?;
            let sol = integrate_jacobi(
                |x| c.p_at(x),
                |x| c.q_eff_at(x),
                &prob.interval,
                0.0,
                1.0,
                &prob.settings,
            )
            .map_err(|e| e.to_string())?;
            (Output::ok(pretty(&json!(sol.find_zeros(true)))), common)
        }
        Command::Hessian { common } => {
            let prob = load(common)?;
            let c = coeffs(&prob)?;
            let rows = (0..c.xs.len())
                .map(|i| {
                    let (p, r, q) = (c.p_samples[i], c.r_samples[i], c.q_raw_samples[i]);
                    vec![c.xs[i], p, r, q, p * q - r * r]
                })
                .collect();
            let fmt = common.format.unwrap_or(Format::Csv);
            (Output::ok(table(fmt, &["x", "P", "R", "Q_raw", "det"], rows)), common)
        }
    };
    Ok(out)
}

fn riccati(common: &Common, w0: Option<f64>) -> Result<Output, String> {
    let prob = load(common)?;
    let c = coeffs(&prob)?;
    let (p, q) = (|x| c.p_at(x), |x| c.q_eff_at(x));
    let fmt = common.format.unwrap_or(Format::Csv);
    let Some(w0) = w0 else {
        let derived = positive_solution(p, q, &prob.interval, &prob.settings)
            .and_then(|pos| riccati_from_jacobi(&pos, prob.settings.grid));
        return Ok(match derived {
            Ok(s) => {
                let rows = s.xs.iter().zip(&s.w).map(|(x, w)| vec![*x, *w]).collect();
                Output::ok(table(fmt, &["x", "w"], rows))
            }
            Err(e) => Output {
                text: String::new(),
                code: EXIT_FAILED,
                message: Some(format!("{e}; try --w0 for an exploratory integration")),
            },
        });
    };
    let outcome =
        integrate_riccati(p, q, &prob.interval, w0, &prob.settings).map_err(|e| e.to_string())?;
    Ok(match (outcome, fmt) {
        (RiccatiOutcome::Bounded { xs, w, .. }, _) => {
            let rows = xs.iter().zip(&w).map(|(x, w)| vec![*x, *w]).collect();
            Output::ok(table(fmt, &["x", "w"], rows))
        }
        (blowup @ RiccatiOutcome::Blowup { .. }, Format::Json) => Output {
            text: pretty(&serde_json::to_value(&blowup).map_err(|e| e.to_string())?),
            code: EXIT_FAILED,
            message: None,
        },
        (RiccatiOutcome::Blowup { location, last_value }, Format::Csv) => Output {
            text: String::new(),
            code: EXIT_FAILED,
            message: Some(format!(
                "exploratory Riccati solution from w0 = {w0} blows up at x = {location} (w = {last_value})"
            )),
        },
    })
}

fn gamma(common: &Common) -> Result<Output, String> {
    let prob = load(common)?;
    let c = coeffs(&prob)?;
    if let Some(i) = c.p_samples.iter().position(|p| p.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) {
        return Err(format!("P({}) = {} is not positive", c.xs[i], c.p_samples[i]));
    }
    let (p, q) = (|x| c.p_at(x), |x| c.q_eff_at(x));
    let n = prob.settings.grid;
    let pos = positive_solution(p, q, &prob.interval, &prob.settings).ok();
    let forms: Vec<Value> = test_battery(prob.interval, n)
        .iter()
        .map(|h| match &pos {
            Some(ps) => {
                let w = |x: f64| {
                    let s = ps.state(x);
                    -s.v / s.u
                };
                let sq = perfect_square_check(p, q, w, h, n);
                json!({"label": h.label, "lhs": sq.lhs, "rhs": sq.rhs, "gap": sq.gap})
            }
            None => json!({
                "label": h.label,
                "lhs": gamma_form(p, q, h, n),
                "rhs": Value::Null,
                "gap": Value::Null,
            }),
        })
        .collect();
    let trend = coercivity_trend(p, q, &prob.interval, COERCIVITY_NODES / 4).map_err(|e| e.to_string())?;
    let value = json!({
        "gamma": trend.last().map(|t| t.1),
        "trend": trend.iter().map(|(k, g)| json!({"n": k, "gamma": g})).collect::<Vec<_>>(),
        "riccati_source": if pos.is_some() { "positive Jacobi solution" } else { "none" },
        "forms": forms,
    });
    Ok(Output::ok(pretty(&value)))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (out, common) = match run(&cli) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    if let Some(msg) = &out.message {
        eprintln!("{msg}");
    }
    if !out.text.is_empty() {
        let written = match &common.output {
            Some(path) => std::fs::write(path, &out.text)
                .map_err(|e| format!("cannot write {}: {e}", path.display())),
            None => std::io::stdout()
                .write_all(out.text.as_bytes())
                .map_err(|e| e.to_string()),
        };
        if let Err(msg) = written {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    ExitCode::from(out.code)
}
