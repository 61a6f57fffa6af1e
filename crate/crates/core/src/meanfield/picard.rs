use serde::{Deserialize, Serialize};

use super::dynamics::Dynamics;
use super::system::{evolve, sample_points, MeanField, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::measures::{wasserstein_1d_sorted, EmpiricalMeasure};
use crate::sde::{LawSummary, NoiseDriver, SampleLaw, TimeGrid};

/// Tag of the replicate used to estimate the Monte Carlo noise floor.
const FLOOR_TAG: u64 = u64::MAX;

/// Initial guess `μ⁽⁰⁾` for the fixed-point iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PicardStart {
    /// Law flow of the dynamics without interaction.
    Free,
    /// The initial law held constant in time.
    FrozenInitial,
    /// A point mass held constant in time.
    Dirac { point: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardOptions {
    /// Atoms per node (`M_s`).
    pub support: usize,
    /// Stopping threshold on the sup-node W₁ gap; `None` uses twice the
    /// measured noise floor.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub start: PicardStart,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            support: 2000,
            tol: None,
            max_iter: 20,
            start: PicardStart::Free,
        }
    }
}

/// Empirical law of the limit equation at every grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureFlow {
    pub grid: TimeGrid,
    pub dim: usize,
    pub support: usize,
    /// `nodes × support × dim`.
    pub laws: Vec<f64>,
    pub iteration_count: usize,
    pub converged: bool,
    pub final_gap: f64,
    /// Sup-node W₁ gap after each iteration.
    pub gaps: Vec<f64>,
    pub tol: f64,
    /// Sup-node W₁ between two independent replicates of the same map.
    pub noise_floor: f64,
}

impl MeasureFlow {
    pub(crate) fn from_trajectory(t: Trajectory) -> Self {
        Self {
            grid: t.grid,
            dim: t.dim,
            support: t.n,
            laws: t.states,
            iteration_count: 0,
            converged: false,
            final_gap: f64::NAN,
            gaps: Vec::new(),
            tol: f64::NAN,
            noise_floor: f64::NAN,
        }
    }

    /// The same law at every node of `grid`.
    pub fn constant(grid: &TimeGrid, atoms: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || atoms.is_empty() || atoms.len() % dim != 0 {
            return Err(invalid("constant flow needs a non-empty cloud"));
        }
        let mut laws = Vec::with_capacity(atoms.len() * grid.nodes());
        for _ in 0..grid.nodes() {
            laws.extend_from_slice(atoms);
        }
        Ok(Self::from_trajectory(Trajectory {
            grid: *grid,
            n: atoms.len() / dim,
            dim,
            states: laws,
        }))
    }

    /// Atoms at node `k`.
    pub fn law(&self, k: usize) -> &[f64] {
        let len = self.support * self.dim;
        &self.laws[k * len..(k + 1) * len]
    }

    pub fn empirical(&self, k: usize) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::uniform(self.law(k).to_vec(), self.dim)
    }

    pub fn coordinate(&self, k: usize, axis: usize) -> Vec<f64> {
        self.law(k).chunks_exact(self.dim).map(|x| x[axis]).collect()
    }

    pub(crate) fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.grid.steps() != grid.steps() || (self.grid.horizon() - grid.horizon()).abs() > 1e-12 {
            return Err(Error::FlowMismatch(format!(
                "flow grid (T = {}, {} steps) differs from run grid (T = {}, {} steps)",
                self.grid.horizon(),
                self.grid.steps(),
                grid.horizon(),
                grid.steps()
            )));
        }
        Ok(())
    }

    pub(crate) fn summaries<D: Dynamics>(&self, model: &D) -> Vec<LawSummary<'_>> {
        (0..self.grid.nodes())
            .map(|k| model.interaction().summarize(self.grid.time(k), self.law(k), self.dim))
            .collect()
    }
}

/// Sup over grid nodes of the W₁ distance between two flows, taken per
/// coordinate (exact on the line) and maximised over the first `coords`
/// coordinates.
pub fn flow_gap(a: &MeasureFlow, b: &MeasureFlow, coords: usize) -> Result<f64> {
    a.check_grid(&b.grid)?;
    if a.dim != b.dim || a.support != b.support {
        return Err(Error::FlowMismatch("flows differ in dimension or support size".into()));
    }
    let mut sup: f64 = 0.0;
    for k in 0..a.grid.nodes() {
        for axis in 0..coords.min(a.dim) {
            sup = sup.max(wasserstein_1d_sorted(&a.coordinate(k, axis), &b.coordinate(k, axis), 1.0));
        }
    }
    Ok(sup)
}

fn apply_map<D: Dynamics>(
    model: &D,
    init: &SampleLaw,
    prev: &MeasureFlow,
    grid: &TimeGrid,
    driver: &NoiseDriver,
) -> Result<MeasureFlow> {
    let x0 = sample_points(init, prev.support, driver, 0, 0);
    let summaries = prev.summaries(model);
    let t = evolve(model, &x0, grid, driver, 0, &MeanField::Frozen(summaries))?;
    Ok(MeasureFlow::from_trajectory(t))
}

/// Fixed point of `μ ↦ Law(X^μ)` where `X^μ` solves the equation with the
/// interaction averaged against the frozen flow `μ`. Iteration `n` uses the
/// independent driver `driver.child(n)`.
///
/// Stops once the sup-node W₁ gap between successive iterates drops below
/// the tolerance. Without interaction the map is constant and one iteration
/// is final. A flow with `converged = false` is returned when `max_iter` is
/// exhausted; callers must check.
pub fn solve_mkv_picard<D: Dynamics>(
    model: &D,
    init: &SampleLaw,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    opts: &PicardOptions,
) -> Result<MeasureFlow> {
    init.validate()?;
    if init.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: init.dim(),
        });
    }
    if opts.support < 2 || opts.max_iter == 0 {
        return Err(invalid("Picard iteration needs support >= 2 and max_iter >= 1"));
    }
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(invalid(format!("Picard tolerance must be positive, got {tol}")));
        }
    }
    let d = model.dim();
    let coords = model.gap_coordinates();
    let start_driver = driver.child(0);
    let mut current = match &opts.start {
        PicardStart::Free => {
            let x0 = sample_points(init, opts.support, &start_driver, 0, 0);
            let t = evolve(&model.free(), &x0, grid, &start_driver, 0, &MeanField::SelfConsistent)?;
            MeasureFlow::from_trajectory(t)
        }
        PicardStart::FrozenInitial => {
            MeasureFlow::constant(grid, &sample_points(init, opts.support, &start_driver, 0, 0), d)?
        }
        PicardStart::Dirac { point } => {
            if point.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: point.len(),
                });
            }
            MeasureFlow::constant(grid, &point.repeat(opts.support), d)?
        }
    };

    let mut gaps = Vec::new();
    let mut noise_floor = f64::NAN;
    let mut tol = opts.tol.unwrap_or(f64::NAN);
    let interacting = !model.interaction().is_none();
    for iter in 1..=opts.max_iter {
        let next = apply_map(model, init, &current, grid, &driver.child(iter as u64))?;
        if iter == 1 {
            let replicate = apply_map(model, init, &current, grid, &driver.child(FLOOR_TAG))?;
            noise_floor = flow_gap(&next, &replicate, coords)?;
            if opts.tol.is_none() {
                tol = 2.0 * noise_floor;
            }
        }
        let gap = flow_gap(&next, &current, coords)?;
        gaps.push(gap);
        log::debug!("picard iteration {iter}: gap {gap:.3e} (tol {tol:.3e})");
        current = next;
        if gap < tol || !interacting {
            return Ok(finish(current, iter, true, gaps, tol, noise_floor));
        }
    }
    log::warn!("Picard iteration did not reach tol {tol:.3e} in {} iterations", opts.max_iter);
    Ok(finish(current, opts.max_iter, false, gaps, tol, noise_floor))
}

fn finish(mut flow: MeasureFlow, iters: usize, converged: bool, gaps: Vec<f64>, tol: f64, floor: f64) -> MeasureFlow {
    flow.iteration_count = iters;
    flow.converged = converged;
    flow.final_gap = *gaps.last().unwrap_or(&f64::NAN);
    flow.gaps = gaps;
    flow.tol = tol;
    flow.noise_floor = floor;
    flow
}
