//! Euler–Maruyama integration with the law argument frozen by the caller.

use super::grid::TimeGrid;
use super::model::Diffusion;
use super::noise::NoiseStream;
use crate::error::{invalid, Error, Result};

/// States at every grid node, row-major `(steps + 1) × dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    dim: usize,
    states: Vec<f64>,
}

impl Path {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.states
    }
}

/// One scheme step: `x ← x + drift·h + σ_t(x)·dw`. Shared by every
/// integrator so that equivalent systems agree bit for bit.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn em_update(
    t: f64,
    h: f64,
    x: &mut [f64],
    drift: &[f64],
    sigma: &Diffusion,
    dw: &[f64],
    next: &mut [f64],
    scratch: &mut Vec<f64>,
) {
    for (n, (xi, bi)) in next.iter_mut().zip(x.iter().zip(drift)) {
        *n = xi + bi * h;
    }
    sigma.apply(t, x, dw, next, scratch);
    x.copy_from_slice(next);
}

/// Integrates `dX = drift(t, X) dt + σ_t(X) dW` on `grid` using normals drawn
/// sequentially from `stream` (one block of `noise_dim` normals per step).
pub fn euler_maruyama(
    drift: &dyn Fn(f64, &[f64], &mut [f64]),
    sigma: &Diffusion,
    x0: &[f64],
    grid: &TimeGrid,
    stream: &mut NoiseStream,
) -> Result<Path> {
    let n = sigma.noise_dim(x0.len());
    let sqrt_h = grid.step().sqrt();
    let mut dw = vec![0.0; n];
    integrate(drift, sigma, x0, grid, |_, out| {
        stream.fill_normals(&mut dw);
        for (o, z) in out.iter_mut().zip(&dw) {
            *o = sqrt_h * z;
        }
    })
}

/// Same scheme driven by precomputed increments (`steps × noise_dim`, already
/// scaled by `sqrt(h)`).
pub fn euler_maruyama_with_increments(
    drift: &dyn Fn(f64, &[f64], &mut [f64]),
    sigma: &Diffusion,
    x0: &[f64],
    grid: &TimeGrid,
    increments: &[f64],
) -> Result<Path> {
    let n = sigma.noise_dim(x0.len());
    if increments.len() != grid.steps() * n {
        return Err(invalid(format!(
            "expected {} increments, got {}",
            grid.steps() * n,
            increments.len()
        )));
    }
    integrate(drift, sigma, x0, grid, |k, out| {
        out.copy_from_slice(&increments[k * n..(k + 1) * n])
    })
}

fn integrate(
    drift: &dyn Fn(f64, &[f64], &mut [f64]),
    sigma: &Diffusion,
    x0: &[f64],
    grid: &TimeGrid,
    mut noise: impl FnMut(usize, &mut [f64]),
) -> Result<Path> {
    let d = x0.len();
    if d == 0 {
        return Err(invalid("empty initial state"));
    }
    let n = sigma.noise_dim(d);
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.nodes() * d);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut dw = vec![0.0; n];
    let mut scratch = Vec::new();
    for k in 0..grid.steps() {
        let t = grid.time(k);
        drift(t, &x, &mut b);
        noise(k, &mut dw);
        em_update(t, h, &mut x, &b, sigma, &dw, &mut next, &mut scratch);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        states.extend_from_slice(&x);
    }
    Ok(Path { dim: d, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::noise::NoiseDriver;

    #[test]
    fn zero_coefficients_give_constant_path() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        let mut s = NoiseDriver::new(1).stream(0, 0);
        let p = euler_maruyama(&|_, _, o: &mut [f64]| o.fill(0.0), &Diffusion::Scalar(0.0), &[1.5, -2.0], &g, &mut s).unwrap();
        assert_eq!(p.len(), 11);
        for k in 0..11 {
            assert_eq!(p.state(k), &[1.5, -2.0]);
        }
    }

    #[test]
    fn stream_and_increment_drivers_agree() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let drv = NoiseDriver::new(3);
        let drift = |_: f64, x: &[f64], o: &mut [f64]| o[0] = -x[0];
        let a = euler_maruyama(&drift, &Diffusion::Scalar(0.7), &[1.0], &g, &mut drv.stream(2, 5)).unwrap();
        let inc = drv.stream(2, 5).increments(&g, 1);
        let b = euler_maruyama_with_increments(&drift, &Diffusion::Scalar(0.7), &[1.0], &g, &inc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        let mut s = NoiseDriver::new(1).stream(0, 0);
        let err = euler_maruyama(&|_, x: &[f64], o: &mut [f64]| o[0] = x[0].powi(8) * 1e10, &Diffusion::Scalar(0.0), &[10.0], &g, &mut s)
            .unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
