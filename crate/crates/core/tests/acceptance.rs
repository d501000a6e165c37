//! Acceptance suite: each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use secvar::autodiff::hessian_pq;
use secvar::expr::{Expr, VAR_X, VAR_Y, VAR_YP};
use secvar::jacobi::{check_c5, integrate_jacobi, positive_solution, C5Outcome, JacobiProfile};
use secvar::quadform::{
    coercivity_constant, gamma_form, omega, perfect_square_check, reduce_omega, test_battery,
    TestFunction,
};
use secvar::riccati::{
    integrate_riccati, reconstruct_h, riccati_from_jacobi, riccati_residual, RiccatiOutcome,
};
use secvar::variational::coefficients;
use secvar::verdict::{check_problem, perturbation_probe, Verdict};
use secvar::{Interval, Problem, Settings};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const N: usize = 2048;

fn unit() -> Interval {
    Interval::unit()
}

fn settings() -> Settings {
    Settings::default()
}

fn one(_: f64) -> f64 {
    1.0
}

fn conjugate_point_accuracy() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = Duration::ZERO;
    for omega in [4.0, 2.0 * PI, 3.0 * PI] {
        let start = Instant::now();
        let q = -omega * omega;
        let sol = integrate_jacobi(one, move |_| q, &unit(), 0.0, 1.0, &settings())
            .map_err(|e| e.to_string())?;
        let zeros = sol.find_zeros(true);
        slowest = slowest.max(start.elapsed());
        let expected: Vec<f64> = (1..)
            .map(|k| k as f64 * PI / omega)
            .take_while(|z| *z <= 1.0 + 1e-9)
            .collect();
        ensure!(
            zeros.len() == expected.len(),
            "omega = {omega}: found {zeros:?}, expected {expected:?}"
        );
        for (z, e) in zeros.iter().zip(&expected) {
            worst = worst.max((z - e).abs());
        }
        ensure!(start.elapsed() < Duration::from_secs(1), "omega = {omega} took {:?}", start.elapsed());
    }
    ensure!(worst <= 1e-6, "max zero error {worst:e}");
    Ok(format!("max zero error {worst:.1e}, slowest case {slowest:.2?}"))
}

fn c5(q: f64) -> C5Outcome {
    check_c5(one, move |_| q, &unit(), &settings())
}

fn c5_decisions() -> Outcome {
    let family = [-20.0, -16.0, -5.0, -2.0, 0.0, 1.0, 5.0, -(PI / 2.0).powi(2)];
    for q in family {
        let out = c5(q);
        let ok = if q > -PI * PI {
            out == C5Outcome::Holds
        } else {
            matches!(out, C5Outcome::ConjugatePoint { .. })
        };
        ensure!(ok, "Q = {q}: {out:?}");
    }
    match c5(-PI * PI) {
        C5Outcome::Borderline { location } if (location - 1.0).abs() <= 1e-6 => {}
        other => return Err(format!("Q = -pi^2: {other:?}")),
    }
    Ok(format!("{} constant-Q cases plus the endpoint case", family.len()))
}

fn knife_edge() -> Outcome {
    let above = c5(-PI * PI * (1.0 - 1e-3));
    let below = c5(-PI * PI * (1.0 + 1e-3));
    ensure!(above == C5Outcome::Holds, "Q = -pi^2 (1 - 1e-3): {above:?}");
    ensure!(
        matches!(below, C5Outcome::ConjugatePoint { .. }),
        "Q = -pi^2 (1 + 1e-3): {below:?}"
    );
    Ok(format!("holds above, {below:?} below"))
}

fn riccati_blowup() -> Outcome {
    let s = settings();
    let loc = match integrate_riccati(one, |_| -16.0, &unit(), 0.0, &s).map_err(|e| e.to_string())? {
        RiccatiOutcome::Blowup { location, .. } => location,
        other => return Err(format!("Q = -16: {other:?}")),
    };
    ensure!((loc - PI / 8.0).abs() <= 1e-4, "blow-up at {loc}");
    let w1 = match integrate_riccati(one, |_| -1.0, &unit(), 0.0, &s).map_err(|e| e.to_string())? {
        RiccatiOutcome::Bounded { w, .. } => *w.last().unwrap(),
        other => return Err(format!("Q = -1: {other:?}")),
    };
    ensure!((w1 - 1f64.tan()).abs() <= 1e-6, "w(1) = {w1}");
    Ok(format!(
        "blow-up error {:.1e}, w(1) error {:.1e}",
        (loc - PI / 8.0).abs(),
        (w1 - 1f64.tan()).abs()
    ))
}

fn equivalence_suite() -> Outcome {
    let family = [-20.0, -16.0, -12.0, -PI * PI - 0.1, -PI * PI + 0.1, -5.0, -2.0, 0.0, 1.0, 5.0];
    let s = settings();
    let mut checked = 0;
    for q in family {
        if (q + PI * PI).abs() < 0.1 - 1e-12 {
            continue;
        }
        let qf = move |_: f64| q;
        let c5_holds = c5(q).holds();
        let c2 = match positive_solution(one, qf, &unit(), &s) {
            Ok(pos) => {
                let w = riccati_from_jacobi(&pos, N).map_err(|e| e.to_string())?;
                riccati_residual(one, qf, &w) <= 1e-5 && w.max_abs() < s.blowup_cap
            }
            Err(_) => false,
        };
        let gamma = coercivity_constant(one, qf, &unit(), 1000)
            .map_err(|e| e.to_string())?
            .gamma;
        ensure!(
            c5_holds == c2 && c2 == (gamma > 0.0),
            "Q = {q}: Jacobi {c5_holds}, Riccati {c2}, gamma {gamma}"
        );
        checked += 1;
    }
    Ok(format!("{checked} instances, three oracles agree"))
}

fn coercivity_values() -> Outcome {
    let cases = [
        (0.0, PI * PI / (PI * PI + 1.0), 1e-3),
        (1.0, 1.0, 1e-6),
        (-16.0, (PI * PI - 16.0) / (PI * PI + 1.0), 1e-3),
    ];
    let mut report = Vec::new();
    for (q, expect, tol) in cases {
        let g = coercivity_constant(one, move |_| q, &unit(), 1000)
            .map_err(|e| e.to_string())?
            .gamma;
        ensure!((g - expect).abs() <= tol, "Q = {q}: gamma {g}, expected {expect}");
        report.push(format!("Q={q}: {g:.6}"));
    }
    Ok(report.join(", "))
}

fn perfect_square() -> Outcome {
    let battery = test_battery(unit(), N);
    let mut worst = 0.0f64;
    for h in &battery {
        let gap = perfect_square_check(one, |_| -1.0, f64::tan, h, N).gap;
        ensure!(gap <= 1e-6, "w = tan, {}: gap {gap:e}", h.label);
        worst = worst.max(gap);
    }
    let pos = positive_solution(one, one, &unit(), &settings()).map_err(|e| e.to_string())?;
    let w = |x: f64| {
        let s = pos.state(x);
        -s.v / s.u
    };
    for h in &battery {
        let gap = perfect_square_check(one, one, w, h, N).gap;
        ensure!(gap <= 1e-6, "constructed w, {}: gap {gap:e}", h.label);
        worst = worst.max(gap);
    }
    Ok(format!("{} checks, max gap {worst:.1e}", 2 * battery.len()))
}

fn reduction_identity() -> Outcome {
    let prob = Problem::coefficients("1 + x^2", "2 - x", Some("x")).map_err(|e| e.to_string())?;
    let c = coefficients(&prob, N).map_err(|e| e.to_string())?;
    let (p, q_eff) = reduce_omega(&c);
    let mut worst = 0.0f64;
    for h in test_battery(unit(), N) {
        let lhs = omega(|x| c.p_at(x), |x| c.q_raw_at(x), |x| c.r_at(x), &h, N);
        let rhs = gamma_form(
            |x| p.eval_x(x).unwrap(),
            |x| q_eff.eval_x(x).unwrap(),
            &h,
            N,
        );
        let d = (lhs - rhs).abs();
        ensure!(d <= 1e-8, "{}: |omega - gamma| = {d:e}", h.label);
        worst = worst.max(d);
    }
    Ok(format!("max difference {worst:.1e}"))
}

fn random_test_function(rng: &mut StdRng) -> TestFunction {
    let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
    let k = rng.gen_range(1..=4);
    let text = format!(
        "x*(1-x)*(({}) + ({})*x + ({})*sin({k}*pi*x) + ({})*exp(x/2))",
        a[0], a[1], a[2], a[3]
    );
    TestFunction::parse(&text, unit()).expect("random test function is admissible")
}

fn integrating_factor_round_trip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0009);
    let p = |x: f64| 1.0 + 0.5 * x;
    let w = f64::tan;
    let mut worst = 0.0f64;
    for i in 0..20 {
        let h = random_test_function(&mut rng);
        let r = |x: f64| h.slope(x) + w(x) * h.value(x) / p(x);
        let rec = reconstruct_h(r, w, p, &unit(), N, &settings()).map_err(|e| e.to_string())?;
        let err = rec
            .xs
            .iter()
            .zip(&rec.h)
            .map(|(x, v)| (v - h.value(*x)).abs())
            .fold(0.0, f64::max);
        ensure!(err <= 1e-8, "case {i} ({}): max error {err:e}", h.label);
        ensure!(
            rec.h_norm <= rec.c * rec.r_norm,
            "case {i}: |h| = {} > c |r| = {}",
            rec.h_norm,
            rec.c * rec.r_norm
        );
        worst = worst.max(err);
    }
    Ok(format!("20 cases, max error {worst:.1e}"))
}

fn end_to_end() -> Outcome {
    let run = |f: &str, y: &str| -> Result<(Problem, secvar::Report), String> {
        let prob = Problem::integrand(f, y).map_err(|e| e.to_string())?;
        let rep = check_problem(&prob, false).map_err(|e| e.to_string())?;
        Ok((prob, rep))
    };
    let (p1, r1) = run("yp^2/2 + y", "x*(x-1)/2")?;
    ensure!(r1.verdict == Verdict::StrictLocalMinimizer, "first example: {:?}", r1.verdict);
    let res = r1.diagnostics.euler_residual_max.unwrap_or(f64::NAN);
    ensure!(res <= 1e-10, "Euler residual {res:e}");

    let (_, r2) = run("yp^2 - 16*y^2", "0")?;
    match r2.verdict {
        Verdict::ConjugatePoint { location } if (location - std::f64::consts::FRAC_PI_4).abs() <= 1e-6 => {}
        other => return Err(format!("second example: {other:?}")),
    }

    let (p3, r3) = run("yp^2 - y^2", "0")?;
    ensure!(r3.verdict == Verdict::StrictLocalMinimizer, "third example: {:?}", r3.verdict);

    let mut probes = 0;
    for prob in [&p1, &p3] {
        let rows = perturbation_probe(prob, &[1e-3, 1e-2], &test_battery(prob.interval, N))
            .map_err(|e| e.to_string())?;
        if let Some(bad) = rows.iter().find(|r| !(r.delta > 0.0)) {
            return Err(format!("probe not positive: {bad:?}"));
        }
        probes += rows.len();
    }
    Ok(format!("three verdicts correct, {probes} positive probe differences"))
}

const SMOOTH_TERMS: [&str; 14] = [
    "yp^2",
    "yp*y",
    "y^2",
    "yp^3",
    "sin({a}*yp + {b}*y)",
    "exp({a}*y)*yp",
    "cosh({a}*yp)",
    "sqrt(1 + yp^2)",
    "log(2 + y^2)",
    "atan(yp*y)",
    "tanh({a}*yp)*y",
    "yp^2*y^2",
    "cos({a}*yp*y)",
    "exp({a}*yp + {b}*y)",
];
const X_FACTORS: [&str; 6] = ["1", "x", "sin(x)", "exp(x/2)", "cos(2*x)", "(1 + x^2)"];

fn random_integrand(rng: &mut StdRng) -> String {
    let terms = rng.gen_range(2..=4);
    (0..terms)
        .map(|_| {
            let t = SMOOTH_TERMS[rng.gen_range(0..SMOOTH_TERMS.len())]
                .replace("{a}", &format!("({:.3})", rng.gen_range(-1.5..1.5)))
                .replace("{b}", &format!("({:.3})", rng.gen_range(-1.5..1.5)));
            let g = X_FACTORS[rng.gen_range(0..X_FACTORS.len())];
            format!("({:.3})*{g}*{t}", rng.gen_range(-2.0..2.0))
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Fourth-order (Richardson) central differences for the three second partials.
fn finite_difference_hessian(f: &Expr, p: f64, y: f64, x: f64) -> [f64; 3] {
    let ev = |dp: f64, dy: f64| f.eval(&[(VAR_YP, p + dp), (VAR_Y, y + dy), (VAR_X, x)]).unwrap();
    let second = |h: f64, along_p: bool| {
        let (a, b) = if along_p { (h, 0.0) } else { (0.0, h) };
        (ev(a, b) - 2.0 * ev(0.0, 0.0) + ev(-a, -b)) / (h * h)
    };
    let mixed = |h: f64| (ev(h, h) - ev(h, -h) - ev(-h, h) + ev(-h, -h)) / (4.0 * h * h);
    let rich = |d: &dyn Fn(f64) -> f64| {
        let h = 1e-3;
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    };
    [rich(&|h| second(h, true)), rich(&mixed), rich(&|h| second(h, false))]
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn derivative_oracles() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0011);
    let (mut worst_hd, mut worst_fd) = (0.0f64, 0.0f64);
    for i in 0..50 {
        let text = random_integrand(&mut rng);
        let f = Expr::parse(&text).map_err(|e| format!("{text}: {e}"))?;
        let fp = f.differentiate(VAR_YP);
        let fy = f.differentiate(VAR_Y);
        let symbolic = [fp.differentiate(VAR_YP), fp.differentiate(VAR_Y), fy.differentiate(VAR_Y)];
        for _ in 0..4 {
            let (p, y, x) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..1.0),
            );
            let b = [(VAR_YP, p), (VAR_Y, y), (VAR_X, x)];
            let sym: Vec<f64> = symbolic.iter().map(|e| e.eval(&b).unwrap()).collect();
            let hd = hessian_pq(&f, p, y, x).map_err(|e| e.to_string())?;
            let hd = [hd.f_pp, hd.f_py, hd.f_yy];
            let fd = finite_difference_hessian(&f, p, y, x);
            for k in 0..3 {
                let scale = sym[k].abs().max(hd[k].abs()).max(1.0);
                worst_hd = worst_hd.max((sym[k] - hd[k]).abs() / scale);
                worst_fd = worst_fd.max((fd[k] - hd[k]).abs() / scale);
                ensure!(
                    close(sym[k], hd[k], 1e-10),
                    "integrand {i} `{text}` entry {k}: symbolic {} vs hyper-dual {}",
                    sym[k],
                    hd[k]
                );
                ensure!(
                    close(fd[k], hd[k], 1e-6) && close(fd[k], sym[k], 1e-6),
                    "integrand {i} `{text}` entry {k}: finite difference {} vs {}",
                    fd[k],
                    hd[k]
                );
            }
        }
    }
    Ok(format!(
        "50 integrands x 4 points, symbolic/hyper-dual {worst_hd:.1e}, finite differences {worst_fd:.1e}"
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("conjugate-point accuracy", conjugate_point_accuracy),
        ("positivity decision on constant Q", c5_decisions),
        ("knife-edge sensitivity", knife_edge),
        ("Riccati blow-up and bounded solution", riccati_blowup),
        ("equivalence of Jacobi, Riccati and coercivity oracles", equivalence_suite),
        ("coercivity constant values", coercivity_values),
        ("perfect-square identity", perfect_square),
        ("integration-by-parts reduction", reduction_identity),
        ("integrating-factor round trip", integrating_factor_round_trip),
        ("end-to-end verdicts and perturbation probe", end_to_end),
        ("derivative oracles", derivative_oracles),
    ];
    let suite = Instant::now();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[{:>2}] PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[{:>2}] FAIL {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.2}s",
        criteria.len() - failed,
        suite.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
