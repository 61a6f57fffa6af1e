use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::quad::gaussian_expectation;
use crate::sde::{dist, euler_maruyama, Domain, ModelSpec, ModulusFunction, NoiseDriver, TimeGrid};
use crate::stats;

const HARNACK_DOMAIN: Domain = Domain::Auxiliary(0x4a7);

/// Test function passed to a semigroup.
pub type TestFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemigroupValue {
    pub value: f64,
    pub stderr: f64,
}

/// `P_t f(x) = E f(X_t^x)`.
pub trait Semigroup: Sync {
    fn apply(&self, t: f64, x: &[f64], f: TestFn<'_>) -> Result<SemigroupValue>;
}

/// Standard heat semigroup on the line, evaluated by quadrature.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeatSemigroup;

impl Semigroup for HeatSemigroup {
    fn apply(&self, t: f64, x: &[f64], f: TestFn<'_>) -> Result<SemigroupValue> {
        if x.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: x.len(),
            });
        }
        if !(t > 0.0) {
            return Err(invalid(format!("semigroup time must be positive, got {t}")));
        }
        Ok(SemigroupValue {
            value: gaussian_expectation(|z| f(&[z]), x[0], t),
            stderr: 0.0,
        })
    }
}

/// Monte Carlo semigroup of a model without interaction. Path `j` uses the
/// same noise stream for every starting point, so differences between
/// starting points are not masked by independent noise.
#[derive(Clone, Debug)]
pub struct MonteCarloSemigroup {
    pub model: ModelSpec,
    pub step: f64,
    pub paths: usize,
    pub driver: NoiseDriver,
}

impl MonteCarloSemigroup {
    /// Terminal states `X_t^x` of every path, row-major.
    pub fn terminal_states(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        if !self.model.b1.is_none() {
            return Err(invalid("Monte Carlo semigroup needs a model without interaction"));
        }
        if x.len() != self.model.dim {
            return Err(Error::DimensionMismatch {
                expected: self.model.dim,
                found: x.len(),
            });
        }
        let grid = TimeGrid::with_step(t, self.step)?;
        let b0 = &self.model.b0;
        let drift = |s: f64, y: &[f64], out: &mut [f64]| b0(s, y, out);
        let ends = exec::try_map_indexed(self.paths, |j| {
            let mut stream = self.driver.stream_in(HARNACK_DOMAIN, 0, j as u32, 0);
            euler_maruyama(&drift, &self.model.sigma, x, &grid, &mut stream).map(|p| p.terminal().to_vec())
        })?;
        Ok(ends.concat())
    }
}

impl Semigroup for MonteCarloSemigroup {
    fn apply(&self, t: f64, x: &[f64], f: TestFn<'_>) -> Result<SemigroupValue> {
        let ends = self.terminal_states(t, x)?;
        let values: Vec<f64> = ends.chunks_exact(x.len()).map(f).collect();
        let (value, stderr) = stats::mean_stderr(&values);
        Ok(SemigroupValue { value, stderr })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackOutcome {
    /// `(P_t f(x))^p`.
    pub lhs: f64,
    /// `P_t f^p(y) · exp(exponent)`.
    pub rhs: f64,
    pub exponent: f64,
    /// Three combined standard errors (plus rounding allowance).
    pub slack: f64,
    pub satisfied: bool,
}

/// Checks `(P_t f(x))^p ≤ P_t f^p(y) exp(exponent(t, x, y, p))`.
#[allow(clippy::too_many_arguments)]
pub fn harnack_check(
    semigroup: &dyn Semigroup,
    f: TestFn<'_>,
    x: &[f64],
    y: &[f64],
    t: f64,
    p: f64,
    exponent: &dyn Fn(f64, &[f64], &[f64], f64) -> f64,
) -> Result<HarnackOutcome> {
    if !(p > 1.0) {
        return Err(invalid(format!("Harnack power must exceed 1, got {p}")));
    }
    probe_non_negative(f, x, y, t)?;
    let fx = semigroup.apply(t, x, f)?;
    let fp = |z: &[f64]| f(z).powf(p);
    let fy = semigroup.apply(t, y, &fp)?;
    let e = exponent(t, x, y, p);
    if !(e >= 0.0) {
        return Err(invalid(format!("Harnack exponent must be non-negative, got {e}")));
    }
    let lhs = fx.value.powf(p);
    let lhs_se = p * fx.value.powf(p - 1.0) * fx.stderr;
    let growth = e.exp();
    let rhs = fy.value * growth;
    let rhs_se = fy.stderr * growth;
    let slack = 3.0 * lhs_se.hypot(rhs_se) + 1e-12 * lhs.max(rhs);
    Ok(HarnackOutcome {
        lhs,
        rhs,
        exponent: e,
        slack,
        satisfied: lhs <= rhs + slack,
    })
}

fn probe_non_negative(f: TestFn<'_>, x: &[f64], y: &[f64], t: f64) -> Result<()> {
    let spread = t.sqrt().max(1.0);
    for base in [x, y] {
        for k in -40..=40 {
            let z: Vec<f64> = base.iter().map(|v| v + 0.2 * k as f64 * spread).collect();
            let v = f(&z);
            if !(v >= 0.0) {
                return Err(invalid(format!("test function is negative ({v}) at {z:?}")));
            }
        }
    }
    Ok(())
}

/// Classical Gaussian exponent `p|x - y|² / (2(p - 1)t)`.
pub fn heat_harnack_exponent(t: f64, x: &[f64], y: &[f64], p: f64) -> f64 {
    let r = dist(x, y);
    p * r * r / (2.0 * (p - 1.0) * t)
}

/// Exponent `c(p)[t φ(r)² + r²/t]` with `c(p) = p c₁ / (2(p - 1))`, `r = |x - y|`.
pub fn dini_harnack_exponent(c1: f64, phi: &ModulusFunction, t: f64, x: &[f64], y: &[f64], p: f64) -> f64 {
    let r = dist(x, y);
    let shape = t * phi.eval(r).powi(2) + r * r / t;
    p * c1 / (2.0 * (p - 1.0)) * shape
}

/// A grid point `(x, y, t, p)` of a Harnack check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub p: f64,
}

/// Smallest `c₁` for which the Dini exponent makes every `(point, f)`
/// combination hold (before Monte Carlo slack).
pub fn calibrate_harnack_constant(
    semigroup: &dyn Semigroup,
    functions: &[TestFn<'_>],
    points: &[HarnackPoint],
    phi: &ModulusFunction,
) -> Result<f64> {
    let mut c1: f64 = 0.0;
    for pt in points {
        let unit = dini_harnack_exponent(1.0, phi, pt.t, &pt.x, &pt.y, pt.p);
        for f in functions {
            let o = harnack_check(semigroup, *f, &pt.x, &pt.y, pt.t, pt.p, &|_, _, _, _| 0.0)?;
            if o.lhs > o.rhs {
                if unit == 0.0 {
                    return Err(invalid(format!(
                        "Harnack inequality fails at x = y = {:?}, which no exponent can repair",
                        pt.x
                    )));
                }
                c1 = c1.max((o.lhs / o.rhs).ln() / unit);
            }
        }
    }
    Ok(c1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub moment: f64,
    pub stderr: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Monte Carlo `∫ (dP_t(x,·)/dP_t(y,·))^{p/(p-1)} dP_t(y,·)` from density
/// ratios sampled under `P_t(y,·)`, compared with `bound` (three standard
/// errors of slack).
pub fn dual_entropy_bound_check(ratios: &[f64], p: f64, bound: f64) -> Result<MomentCheck> {
    if !(p > 1.0) || ratios.len() < 2 {
        return Err(invalid("moment check needs p > 1 and at least two ratios"));
    }
    if let Some(bad) = ratios.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(invalid(format!("density ratio {bad} is not a finite non-negative number")));
    }
    let q = p / (p - 1.0);
    let powered: Vec<f64> = ratios.iter().map(|r| r.powf(q)).collect();
    let (moment, stderr) = stats::mean_stderr(&powered);
    Ok(MomentCheck {
        moment,
        stderr,
        bound,
        satisfied: moment <= bound + 3.0 * stderr,
    })
}

/// Closed form of the ratio moment for `P_t(x,·) = N(x, t I)`:
/// `exp{p |x - y|² / (2 t (p - 1)²)}`.
pub fn gaussian_ratio_moment(x: &[f64], y: &[f64], t: f64, p: f64) -> f64 {
    let r = dist(x, y);
    (p * r * r / (2.0 * t * (p - 1.0) * (p - 1.0))).exp()
}

/// `n` draws of `dN(x, tI)/dN(y, tI)` at points sampled from `N(y, tI)`.
pub fn gaussian_ratio_samples(x: &[f64], y: &[f64], t: f64, n: usize, driver: &NoiseDriver) -> Vec<f64> {
    let d = x.len();
    let s = t.sqrt();
    exec::map_indexed(n, |j| {
        let mut stream = driver.stream_in(HARNACK_DOMAIN, 1, j as u32, 0);
        let mut z = vec![0.0; d];
        stream.fill_normals(&mut z);
        let mut log_ratio = 0.0;
        for i in 0..d {
            let zi = y[i] + s * z[i];
            log_ratio += ((zi - y[i]).powi(2) - (zi - x[i]).powi(2)) / (2.0 * t);
        }
        log_ratio.exp()
    })
}
