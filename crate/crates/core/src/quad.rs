//! Composite Simpson quadrature.

/// Composite Simpson rule for `f` on `[a, b]` with `n` subintervals.
/// An odd `n` is bumped to the next even number.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let res: Result<f64, std::convert::Infallible> = try_simpson(|x| Ok(f(x)), a, b, n);
    match res {
        Ok(v) => v,
    }
}

/// Fallible variant of [`simpson`]; stops at the first error.
pub fn try_simpson<F, E>(mut f: F, a: f64, b: f64, n: usize) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + h * i as f64)?;
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (f(a)? + f(b)? + 4.0 * odd + 2.0 * even))
}

/// Simpson rule over uniformly spaced samples (`values.len()` odd).
pub fn simpson_samples(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n >= 2 && n.is_multiple_of(2), "simpson_samples needs an even number of panels");
    let inner: f64 = values[1..n]
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { 4.0 * v } else { 2.0 * v })
        .sum();
    h / 3.0 * (values[0] + values[n] + inner)
}
