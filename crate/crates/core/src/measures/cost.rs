use std::fmt;
use std::sync::Arc;

use crate::sde::{dist, ModulusFunction};

pub type PairCost = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Transport cost `Ψ(x, y) ≥ 0` with `Ψ(x, x) = 0`.
#[derive(Clone)]
pub enum CostFunction {
    /// `|x - y|^p`.
    EuclideanPower(f64),
    /// `Ψ_η(x, y) = |x - y|^{2η} + |x - y|²`.
    PsiEta(f64),
    /// `Ψ(x, y) = φ(|x - y|)² + |x - y|²`.
    PsiPhi(ModulusFunction),
    /// `φ(|x - y|)`, the cost whose transport value is `W_φ`.
    PhiDistance(ModulusFunction),
    Custom(PairCost),
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostFunction::EuclideanPower(p) => write!(f, "EuclideanPower({p})"),
            CostFunction::PsiEta(e) => write!(f, "PsiEta({e})"),
            CostFunction::PsiPhi(m) => write!(f, "PsiPhi({})", m.name()),
            CostFunction::PhiDistance(m) => write!(f, "PhiDistance({})", m.name()),
            CostFunction::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl CostFunction {
    pub fn custom(f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        CostFunction::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            CostFunction::Custom(c) => c(x, y),
            _ => self.of_distance(dist(x, y)),
        }
    }

    /// Value as a function of `r = |x - y|` for the radial kinds.
    fn of_distance(&self, r: f64) -> f64 {
        match self {
            CostFunction::EuclideanPower(p) => {
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(*p)
                }
            }
            CostFunction::PsiEta(eta) => {
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(2.0 * eta) + r * r
                }
            }
            CostFunction::PsiPhi(phi) => phi.eval(r).powi(2) + r * r,
            CostFunction::PhiDistance(phi) => phi.eval(r),
            CostFunction::Custom(_) => unreachable!(),
        }
    }

    /// Whether the cost is a convex function of `x - y` on the line, in which
    /// case the monotone (sorted) coupling is optimal in one dimension.
    pub fn is_convex_1d(&self) -> bool {
        match self {
            CostFunction::EuclideanPower(p) => *p >= 1.0,
            CostFunction::PsiEta(eta) => *eta >= 0.5,
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{make_modulus, ModulusKind};

    #[test]
    fn diagonal_vanishes() {
        let phi = make_modulus(ModulusKind::Power(0.5)).unwrap();
        let x = [0.3, -1.2];
        for c in [
            CostFunction::EuclideanPower(0.5),
            CostFunction::EuclideanPower(2.0),
            CostFunction::PsiEta(0.25),
            CostFunction::PsiPhi(phi.clone()),
            CostFunction::PhiDistance(phi),
        ] {
            assert_eq!(c.eval(&x, &x), 0.0, "{c:?}");
        }
    }

    #[test]
    fn psi_eta_value() {
        assert_eq!(CostFunction::PsiEta(0.5).eval(&[0.0], &[1.0]), 2.0);
        assert!((CostFunction::PsiEta(0.25).eval(&[0.0], &[4.0]) - 18.0).abs() < 1e-12);
    }
}
