use serde::{Deserialize, Serialize};

use super::dynamics::Dynamics;
use super::picard::MeasureFlow;
use super::system::{evolve, sample_points, MeanField, Trajectory};
use crate::error::{Error, Result};
use crate::sde::{dist, NoiseDriver, SampleLaw, TimeGrid};

/// How the particle system's initial points `X_0^{i,N}` are tied to the
/// limit copies' initial points `X_0^i`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pairing {
    /// `X_0^{i,N} = X_0^i`.
    #[default]
    Identical,
    /// `X_0^{i,N} = X_0^i + c / N^a` in every coordinate.
    Shift { c: f64, a: f64 },
    /// `X_0^{i,N}` drawn independently from the particle-system law.
    Independent,
    /// Coordinate-wise rank matching of an independent particle-system
    /// sample to the limit sample.
    Comonotone,
}

impl Pairing {
    fn pair(&self, law_ips: &SampleLaw, limit0: &[f64], n: usize, d: usize, driver: &NoiseDriver, rep: u32) -> Vec<f64> {
        match self {
            Pairing::Identical => limit0.to_vec(),
            Pairing::Shift { c, a } => {
                let s = c / (n as f64).powf(*a);
                limit0.iter().map(|x| x + s).collect()
            }
            Pairing::Independent => sample_points(law_ips, n, driver, 1, rep),
            Pairing::Comonotone => {
                let fresh = sample_points(law_ips, n, driver, 1, rep);
                let mut out = vec![0.0; n * d];
                for axis in 0..d {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.sort_by(|&i, &j| limit0[i * d + axis].total_cmp(&limit0[j * d + axis]));
                    let mut values: Vec<f64> = (0..n).map(|i| fresh[i * d + axis]).collect();
                    values.sort_by(f64::total_cmp);
                    for (rank, &i) in order.iter().enumerate() {
                        out[i * d + axis] = values[rank];
                    }
                }
                out
            }
        }
    }
}

/// The particle system and its two reference systems on one set of noise
/// streams: particle `i` of each system is driven by the same Brownian
/// stream.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    /// `X^{i,N}`: interacting particles.
    pub ips: Trajectory,
    /// `X̄^i`: started at `X_0^{i,N}`, interacting with the limit flow.
    pub xbar: Trajectory,
    /// `X^i`: started at `X_0^i`, interacting with the limit flow.
    pub limit: Trajectory,
    /// `|X_0^{i,N} - X_0^i|`.
    pub initial_displacements: Vec<f64>,
    pub driver: NoiseDriver,
    pub replication: u32,
}

impl CoupledRun {
    pub fn n(&self) -> usize {
        self.ips.n
    }

    /// `(1/N) Σ_i |X^{i,N}_{t_k} - X̄^i_{t_k}|²`.
    pub fn strong_gap(&self, k: usize) -> f64 {
        self.mean_sq_gap(k, self.ips.dim)
    }

    /// Strong gap restricted to the first `coords` coordinates.
    pub fn mean_sq_gap(&self, k: usize, coords: usize) -> f64 {
        let d = self.ips.dim;
        let c = coords.min(d);
        let a = self.ips.at(k);
        let b = self.xbar.at(k);
        let sq: Vec<f64> = a
            .chunks_exact(d)
            .zip(b.chunks_exact(d))
            .map(|(x, y)| x[..c].iter().zip(&y[..c]).map(|(u, v)| (u - v) * (u - v)).sum())
            .collect();
        crate::stats::mean(&sq)
    }
}

/// Runs the three coupled systems with `n` particles for replication
/// `replication` of `driver`. The limit copies' initial points come from
/// `init_limit`; `pairing` derives the particle system's initial points
/// (using `init_ips` where a fresh draw is needed).
#[allow(clippy::too_many_arguments)]
pub fn run_coupled<D: Dynamics>(
    model: &D,
    init_ips: &SampleLaw,
    init_limit: &SampleLaw,
    pairing: &Pairing,
    n: usize,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    replication: u32,
    flow: &MeasureFlow,
) -> Result<CoupledRun> {
    let d = model.dim();
    for law in [init_ips, init_limit] {
        law.validate()?;
        if law.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: law.dim(),
            });
        }
    }
    if flow.dim != d {
        return Err(Error::FlowMismatch(format!("flow has dim {} but the model has {d}", flow.dim)));
    }
    flow.check_grid(grid)?;
    if !flow.converged {
        log::warn!("coupled run against a flow that did not converge (gap {:.3e})", flow.final_gap);
    }
    if n == 0 {
        return Err(crate::error::invalid("coupled run needs at least one particle"));
    }
    let limit0 = sample_points(init_limit, n, driver, 0, replication);
    let ips0 = pairing.pair(init_ips, &limit0, n, d, driver, replication);
    let initial_displacements = ips0
        .chunks_exact(d)
        .zip(limit0.chunks_exact(d))
        .map(|(a, b)| dist(a, b))
        .collect();

    let ips = evolve(model, &ips0, grid, driver, replication, &MeanField::SelfConsistent)?;
    let xbar = evolve(model, &ips0, grid, driver, replication, &MeanField::Frozen(flow.summaries(model)))?;
    let limit = if ips0 == limit0 {
        xbar.clone()
    } else {
        evolve(model, &limit0, grid, driver, replication, &MeanField::Frozen(flow.summaries(model)))?
    };
    Ok(CoupledRun {
        ips,
        xbar,
        limit,
        initial_displacements,
        driver: *driver,
        replication,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sde::{Diffusion, Interaction, ModelConstants, ModelSpec};

    fn free_model() -> ModelSpec {
        ModelSpec {
            name: "ou".into(),
            dim: 1,
            b0: Arc::new(|_, x, out| out[0] = -x[0]),
            b1: Interaction::None,
            sigma: Diffusion::Scalar(1.0),
            constants: ModelConstants {
                k_b: 1.0,
                k_sigma: 0.0,
                delta: 1.0,
                b1_sup_norm: 0.0,
                phi: None,
            },
            horizon: 1.0,
        }
    }

    #[test]
    fn free_identical_systems_coincide() {
        let m = free_model();
        let grid = TimeGrid::new(1.0, 25).unwrap();
        let driver = NoiseDriver::new(9);
        let law = SampleLaw::standard_normal(1);
        let flow = MeasureFlow::constant(&grid, &[0.0, 1.0], 1).unwrap();
        let run = run_coupled(&m, &law, &law, &Pairing::Identical, 16, &grid, &driver, 2, &flow).unwrap();
        assert_eq!(run.ips.states, run.xbar.states);
        assert_eq!(run.ips.states, run.limit.states);
        assert!(run.initial_displacements.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn shift_pairing_displaces_by_one_over_n() {
        let m = free_model();
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let law = SampleLaw::standard_normal(1);
        let flow = MeasureFlow::constant(&grid, &[0.0], 1).unwrap();
        let n = 32;
        let run = run_coupled(
            &m,
            &law,
            &law,
            &Pairing::Shift { c: 1.0, a: 1.0 },
            n,
            &grid,
            &NoiseDriver::new(1),
            0,
            &flow,
        )
        .unwrap();
        for d in &run.initial_displacements {
            assert!((d - 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn comonotone_pairing_preserves_rank_order() {
        let law = SampleLaw::standard_normal(1);
        let driver = NoiseDriver::new(4);
        let limit0 = sample_points(&law, 50, &driver, 0, 0);
        let ips0 = Pairing::Comonotone.pair(&law, &limit0, 50, 1, &driver, 0);
        for i in 0..50 {
            for j in 0..50 {
                if limit0[i] < limit0[j] {
                    assert!(ips0[i] <= ips0[j]);
                }
            }
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let m = free_model();
        let law = SampleLaw::standard_normal(1);
        let flow = MeasureFlow::constant(&TimeGrid::new(1.0, 4).unwrap(), &[0.0], 1).unwrap();
        let err = run_coupled(
            &m,
            &law,
            &law,
            &Pairing::Identical,
            4,
            &TimeGrid::new(1.0, 8).unwrap(),
            &NoiseDriver::new(0),
            0,
            &flow,
        )
        .unwrap_err();
        assert!(matches!(err, Error::FlowMismatch(_)));
    }
}
