//! One-dimensional quadrature used by the audits and analytic oracles.

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`. Returns `None` when the recursion depth is exhausted before the
/// error estimate meets the tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Option<f64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return None;
    }
    if delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `E[g(x + sqrt(t) Z)]` for standard normal `Z`, by Simpson quadrature on
/// `|z| <= 12`. Accurate to roughly machine precision for smooth bounded `g`.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(g: F, x: f64, t: f64) -> f64 {
    let s = t.sqrt();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    simpson(
        |z| g(x + s * z) * norm * (-0.5 * z * z).exp(),
        -12.0,
        12.0,
        4800,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        let a = 1e-8;
        let v = adaptive_simpson(&|x: f64| 1.0 / x.sqrt(), a, 1.0, 1e-9).unwrap();
        assert!((v - 2.0 * (1.0 - a.sqrt())).abs() < 1e-7, "{v}");
    }

    #[test]
    fn gaussian_moments() {
        assert!((gaussian_expectation(|y| y * y, 1.0, 0.5) - 1.5).abs() < 1e-12);
        assert!((gaussian_expectation(|_| 1.0, 3.0, 2.0) - 1.0).abs() < 1e-12);
    }
}
