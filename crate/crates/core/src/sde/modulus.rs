//! Moduli of continuity of Dini type.
//!
//! A modulus `φ` is admitted when it is nondecreasing with `φ(0) = 0`, `φ²` is
//! concave and `∫₀¹ φ(r)/r dr` is finite. Each condition is audited
//! numerically when the modulus is constructed.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

const AUDIT_POINTS: usize = 1000;
const AUDIT_RANGE: f64 = 10.0;
const DINI_CUTOFF: f64 = 1e-10;
/// Ratio of successive innermost-decade contributions above which the Dini
/// integral is treated as divergent.
const DINI_DECAY_LIMIT: f64 = 0.999;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum ModulusKind {
    /// `φ(r) = r^a`, `a ∈ (0, 1/2]`.
    Power(f64),
    /// `φ(r) = sqrt(min(r, c))`: `φ²` linear up to the cap `c`.
    LinearCap(f64),
}

#[derive(Clone)]
pub struct ModulusFunction {
    name: String,
    eval: ScalarFn,
    dini_integral: f64,
    dini_hint: Option<f64>,
}

impl fmt::Debug for ModulusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusFunction")
            .field("name", &self.name)
            .field("dini_integral", &self.dini_integral)
            .finish()
    }
}

impl ModulusFunction {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    /// `∫₀¹ φ(r)/r dr`; closed form when the kind provides one.
    pub fn dini_integral(&self) -> f64 {
        self.dini_hint.unwrap_or(self.dini_integral)
    }

    /// Numerically estimated Dini integral (cutoff plus geometric tail).
    pub fn dini_integral_numeric(&self) -> f64 {
        self.dini_integral
    }

    pub fn identity() -> Self {
        // φ(r) = r is a valid cost modulus for W_φ even though φ² is not concave.
        Self {
            name: "identity".into(),
            eval: Arc::new(|r| r),
            dini_integral: 1.0,
            dini_hint: Some(1.0),
        }
    }

    /// Audits an arbitrary function for class membership.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let name = name.into();
        let eval: ScalarFn = Arc::new(f);
        let dini_integral = audit(&name, &eval)?;
        Ok(Self {
            name,
            eval,
            dini_integral,
            dini_hint: None,
        })
    }

    /// Like [`custom`](Self::custom) but only requiring an increasing, concave
    /// modulus with `φ(0) = 0` (enough for `φ(|x-y|)` to be a metric).
    pub fn concave_metric(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let name = name.into();
        let eval: ScalarFn = Arc::new(f);
        check_zero_and_monotone(&name, &eval)?;
        midpoint_concave(&name, &|r| eval(r), "φ")?;
        Ok(Self {
            name,
            eval,
            dini_integral: f64::NAN,
            dini_hint: None,
        })
    }
}

pub fn make_modulus(kind: ModulusKind) -> Result<ModulusFunction> {
    match kind {
        ModulusKind::Power(a) => {
            if !(a > 0.0 && a <= 0.5) {
                return Err(Error::InvalidModulus {
                    name: format!("power({a})"),
                    reason: "exponent must lie in (0, 1/2]".into(),
                });
            }
            let mut m = ModulusFunction::custom(format!("power({a})"), move |r: f64| r.powf(a))?;
            m.dini_hint = Some(1.0 / a);
            Ok(m)
        }
        ModulusKind::LinearCap(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidModulus {
                    name: format!("linear_cap({c})"),
                    reason: "cap must be positive".into(),
                });
            }
            let mut m = ModulusFunction::custom(format!("linear_cap({c})"), move |r: f64| r.min(c).sqrt())?;
            // ∫₀^min(c,1) r^{-1/2} dr + ∫_c^1 √c / r dr
            m.dini_hint = Some(if c >= 1.0 {
                2.0
            } else {
                2.0 * c.sqrt() - c.sqrt() * c.ln()
            });
            Ok(m)
        }
    }
}

fn fail(name: &str, reason: String) -> Error {
    Error::InvalidModulus {
        name: name.to_string(),
        reason,
    }
}

fn audit_grid() -> impl Iterator<Item = f64> {
    (0..=AUDIT_POINTS).map(|j| AUDIT_RANGE * j as f64 / AUDIT_POINTS as f64)
}

fn check_zero_and_monotone(name: &str, f: &ScalarFn) -> Result<()> {
    let f0 = f(0.0);
    if f0 != 0.0 {
        return Err(fail(name, format!("φ(0) = {f0}, expected 0")));
    }
    let vals: Vec<f64> = audit_grid().map(|r| f(r)).collect();
    if let Some(bad) = vals.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(fail(name, format!("φ is negative or non-finite at grid point {bad}")));
    }
    for (j, w) in vals.windows(2).enumerate() {
        if w[1] < w[0] - 1e-12 * w[0].abs().max(1.0) {
            return Err(fail(name, format!("φ decreases between grid points {j} and {}", j + 1)));
        }
    }
    Ok(())
}

fn midpoint_concave(name: &str, g: &dyn Fn(f64) -> f64, label: &str) -> Result<()> {
    let vals: Vec<f64> = audit_grid().map(g).collect();
    for (j, w) in vals.windows(3).enumerate() {
        let chord = 0.5 * (w[0] + w[2]);
        if w[1] < chord - 1e-12 * chord.abs().max(1.0) {
            let r = AUDIT_RANGE * (j + 1) as f64 / AUDIT_POINTS as f64;
            return Err(fail(name, format!("{label} fails the midpoint concavity test at r = {r}")));
        }
    }
    Ok(())
}

/// Full class audit; returns the estimated Dini integral.
fn audit(name: &str, f: &ScalarFn) -> Result<f64> {
    check_zero_and_monotone(name, f)?;
    midpoint_concave(name, &|r| f(r).powi(2), "φ²")?;

    // Substituting r = e^s turns ∫ φ(r)/r dr into ∫ φ(e^s) ds.
    let integrand = |s: f64| f(s.exp());
    let decade = std::f64::consts::LN_10;
    let lo = DINI_CUTOFF.ln();
    let body = adaptive_simpson(&integrand, lo, 0.0, 1e-10)
        .ok_or_else(|| fail(name, "Dini integral quadrature did not converge".into()))?;
    let inner = adaptive_simpson(&integrand, lo, lo + decade, 1e-13).unwrap_or(f64::NAN);
    let next = adaptive_simpson(&integrand, lo + decade, lo + 2.0 * decade, 1e-13).unwrap_or(f64::NAN);
    if !(body.is_finite() && inner.is_finite() && next.is_finite()) {
        return Err(fail(name, "Dini integral is not finite".into()));
    }
    if next <= 0.0 {
        return Ok(body);
    }
    let ratio = inner / next;
    if ratio > DINI_DECAY_LIMIT {
        return Err(fail(
            name,
            format!("Dini integral appears divergent (innermost decade ratio {ratio:.4})"),
        ));
    }
    Ok(body + inner * ratio / (1.0 - ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_half() {
        let m = make_modulus(ModulusKind::Power(0.5)).unwrap();
        assert_eq!(m.eval(4.0), 2.0);
        assert_eq!(m.dini_integral(), 2.0);
        assert!((m.dini_integral_numeric() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn power_out_of_range() {
        assert!(make_modulus(ModulusKind::Power(0.75)).is_err());
        assert!(make_modulus(ModulusKind::Power(0.0)).is_err());
    }

    #[test]
    fn disguised_linear_fails_concavity() {
        let err = ModulusFunction::custom("linear", |r| r).unwrap_err();
        assert!(err.to_string().contains("concavity"), "{err}");
    }

    #[test]
    fn divergent_dini_rejected() {
        let err = ModulusFunction::custom("step", |r: f64| if r > 0.0 { 1.0 } else { 0.0 }).unwrap_err();
        assert!(err.to_string().contains("divergent"), "{err}");
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(ModulusFunction::custom("bump", |r: f64| (r * (-r).exp()).sqrt()).is_err());
    }

    #[test]
    fn linear_cap_dini_matches_closed_form() {
        let m = make_modulus(ModulusKind::LinearCap(0.25)).unwrap();
        assert!((m.dini_integral_numeric() - m.dini_integral()).abs() < 1e-6);
        assert_eq!(m.eval(9.0), 0.5);
    }
}
