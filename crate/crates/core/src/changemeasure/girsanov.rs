use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sde::{Diffusion, Path, TimeGrid};

/// `log R_T = Σ ⟨γ_k, ΔW_k⟩ - ½ Σ |γ_k|² h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GirsanovWeight {
    pub log_weight: f64,
    pub stochastic_integral: f64,
    pub quadratic_term: f64,
}

impl GirsanovWeight {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Weight turning the law of an Euler–Maruyama path driven by `drift_a` into
/// the law of the `drift_b` scheme. `γ_k = σ*(σσ*)⁻¹(b - a)` is evaluated at
/// the left point of each step, which makes the weight exact for the scheme:
/// under `R_T · P` the shifted increments `ΔW_k - γ_k h` are i.i.d.
/// `N(0, h)`.
pub fn girsanov_weight(
    path: &Path,
    drift_a: &dyn Fn(f64, &[f64], &mut [f64]),
    drift_b: &dyn Fn(f64, &[f64], &mut [f64]),
    sigma: &Diffusion,
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<GirsanovWeight> {
    let d = path.dim();
    let m = sigma.noise_dim(d);
    if path.len() != grid.nodes() || increments.len() != grid.steps() * m {
        return Err(invalid(format!(
            "path with {} nodes and {} increments does not fit a grid of {} steps",
            path.len(),
            increments.len(),
            grid.steps()
        )));
    }
    let h = grid.step();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut stochastic = Vec::with_capacity(grid.steps());
    let mut quadratic = Vec::with_capacity(grid.steps());
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let x = path.state(k);
        drift_a(t, x, &mut a);
        drift_b(t, x, &mut b);
        let diff: Vec<f64> = b.iter().zip(&a).map(|(u, v)| u - v).collect();
        if diff.iter().all(|v| *v == 0.0) {
            stochastic.push(0.0);
            quadratic.push(0.0);
            continue;
        }
        let gamma = sigma
            .pseudo_inverse_apply(t, x, &diff)
            .ok_or(Error::SingularDiffusion { step: k })?;
        let dw = &increments[k * m..(k + 1) * m];
        stochastic.push(gamma.iter().zip(dw).map(|(g, w)| g * w).sum());
        quadratic.push(0.5 * gamma.iter().map(|g| g * g).sum::<f64>() * h);
    }
    let stochastic_integral = crate::stats::pairwise_sum(&stochastic);
    let quadratic_term = crate::stats::pairwise_sum(&quadratic);
    Ok(GirsanovWeight {
        log_weight: stochastic_integral - quadratic_term,
        stochastic_integral,
        quadratic_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{euler_maruyama_with_increments, NoiseDriver};

    #[test]
    fn equal_drifts_give_unit_weight() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let inc = NoiseDriver::new(1).stream(0, 0).increments(&grid, 1);
        let drift = |_: f64, x: &[f64], o: &mut [f64]| o[0] = -x[0];
        let path = euler_maruyama_with_increments(&drift, &Diffusion::Scalar(1.0), &[0.3], &grid, &inc).unwrap();
        let w = girsanov_weight(&path, &drift, &drift, &Diffusion::Scalar(1.0), &grid, &inc).unwrap();
        assert_eq!(w.log_weight, 0.0);
    }

    #[test]
    fn constant_shift_closed_form() {
        // σ = 2, discrepancy c = 1: γ = 1/2, log R = ½ W_T - ⅛ T.
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let inc = NoiseDriver::new(2).stream(0, 0).increments(&grid, 1);
        let a = |_: f64, _: &[f64], o: &mut [f64]| o[0] = 0.0;
        let b = |_: f64, _: &[f64], o: &mut [f64]| o[0] = 1.0;
        let sigma = Diffusion::Scalar(2.0);
        let path = euler_maruyama_with_increments(&a, &sigma, &[0.0], &grid, &inc).unwrap();
        let w = girsanov_weight(&path, &a, &b, &sigma, &grid, &inc).unwrap();
        let wt: f64 = inc.iter().sum();
        assert!((w.log_weight - (0.5 * wt - 0.125)).abs() < 1e-12);
        assert!((w.log_weight - (w.stochastic_integral - w.quadratic_term)).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_increments() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let inc = vec![0.0; 10];
        let a = |_: f64, _: &[f64], o: &mut [f64]| o[0] = 0.0;
        let path = euler_maruyama_with_increments(&a, &Diffusion::Scalar(1.0), &[0.0], &grid, &inc).unwrap();
        assert!(girsanov_weight(&path, &a, &a, &Diffusion::Scalar(1.0), &grid, &inc[..5]).is_err());
    }
}
