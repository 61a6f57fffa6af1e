use super::dynamics::{Dynamics, StepWork};
use super::picard::MeasureFlow;
use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::sde::{Domain, LawSummary, NoiseDriver, NoiseStream, SampleLaw, TimeGrid};

/// Particle states at one time, row-major `N × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub states: Vec<f64>,
    pub dim: usize,
    pub time: f64,
}

impl Ensemble {
    pub fn new(states: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || states.is_empty() || states.len() % dim != 0 {
            return Err(invalid(format!(
                "ensemble of {} values is not a non-empty multiple of dim {dim}",
                states.len()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        Ok(Self { states, dim, time: 0.0 })
    }

    /// `n` i.i.d. draws from `law`; particle `i` uses its own initial stream,
    /// so the draw does not depend on `n` or on scheduling.
    pub fn sample(law: &SampleLaw, n: usize, driver: &NoiseDriver, replication: u32) -> Result<Self> {
        law.validate()?;
        Self::new(sample_points(law, n, driver, 0, replication), law.dim())
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }
}

pub(crate) fn sample_points(law: &SampleLaw, n: usize, driver: &NoiseDriver, lane: u32, replication: u32) -> Vec<f64> {
    let d = law.dim();
    let mut out = vec![0.0; n * d];
    exec::for_each_chunk_mut(&mut out, d, |i, x| {
        let mut s = driver.stream_in(Domain::Initial, lane, i as u32, replication);
        law.sample_into(&mut s, x);
    });
    out
}

/// States of `n` particles at every node of a grid, `nodes × n × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub n: usize,
    pub dim: usize,
    pub states: Vec<f64>,
}

impl Trajectory {
    /// Ensemble snapshot at node `k`.
    pub fn at(&self, k: usize) -> &[f64] {
        let len = self.n * self.dim;
        &self.states[k * len..(k + 1) * len]
    }

    pub fn particle(&self, k: usize, i: usize) -> &[f64] {
        &self.at(k)[i * self.dim..(i + 1) * self.dim]
    }

    /// Values of coordinate `axis` of every particle at node `k`.
    pub fn coordinate(&self, k: usize, axis: usize) -> Vec<f64> {
        self.at(k).chunks_exact(self.dim).map(|x| x[axis]).collect()
    }

    pub fn ensemble(&self, k: usize) -> Ensemble {
        Ensemble {
            states: self.at(k).to_vec(),
            dim: self.dim,
            time: self.grid.time(k),
        }
    }
}

/// Where the law in the interaction term comes from.
pub(crate) enum MeanField<'a> {
    /// The particles' own empirical measure.
    SelfConsistent,
    /// A given flow, one summary per grid node.
    Frozen(Vec<LawSummary<'a>>),
}

struct ParticleState {
    lanes: Vec<NoiseStream>,
    work: StepWork,
    mean_field: Vec<f64>,
    z: Vec<f64>,
}

/// Shared stepping loop. Particle `i` draws its normals from
/// `driver.stream_in(Brownian, lane, i, replication)` for each noise lane.
pub(crate) fn evolve<D: Dynamics>(
    model: &D,
    x0: &[f64],
    grid: &TimeGrid,
    driver: &NoiseDriver,
    replication: u32,
    field: &MeanField<'_>,
) -> Result<Trajectory> {
    let d = model.dim();
    if d == 0 || x0.is_empty() || x0.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if d == 0 { 0 } else { x0.len() % d },
        });
    }
    if let MeanField::Frozen(s) = field {
        if s.len() != grid.nodes() {
            return Err(Error::FlowMismatch(format!(
                "{} law summaries for {} grid nodes",
                s.len(),
                grid.nodes()
            )));
        }
    }
    let n = x0.len() / d;
    let (lanes, per_lane) = model.noise_layout();
    let h = grid.step();
    let interaction = model.interaction();

    let mut particles: Vec<ParticleState> = (0..n)
        .map(|i| ParticleState {
            lanes: (0..lanes)
                .map(|l| driver.stream_in(Domain::Brownian, l as u32, i as u32, replication))
                .collect(),
            work: StepWork::default(),
            mean_field: vec![0.0; d],
            z: vec![0.0; lanes * per_lane],
        })
        .collect();

    let mut states = Vec::with_capacity(grid.nodes() * n * d);
    states.extend_from_slice(x0);
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; n * d];
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let own;
        let summary = match field {
            MeanField::SelfConsistent => {
                own = interaction.summarize(t, &cur, d);
                &own
            }
            MeanField::Frozen(s) => &s[k],
        };
        let snapshot = &cur;
        exec::for_each_chunk_zip(&mut next, d, &mut particles, |i, x, p| {
            x.copy_from_slice(&snapshot[i * d..(i + 1) * d]);
            interaction.average(t, x, summary, &mut p.mean_field, &mut p.work.scratch);
            for (lane, z) in p.lanes.iter_mut().zip(p.z.chunks_exact_mut(per_lane.max(1))) {
                lane.fill_normals(z);
            }
            model.advance(t, h, x, &p.mean_field, &p.z, &mut p.work);
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        std::mem::swap(&mut cur, &mut next);
        states.extend_from_slice(&cur);
    }
    Ok(Trajectory {
        grid: *grid,
        n,
        dim: d,
        states,
    })
}

/// The `N`-particle system driven by its own empirical measure (the particle
/// itself included), replication `replication` of `driver`.
pub fn simulate_ips<D: Dynamics>(
    model: &D,
    init: &Ensemble,
    grid: &TimeGrid,
    driver: &NoiseDriver,
    replication: u32,
) -> Result<Trajectory> {
    if init.dim != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: init.dim,
        });
    }
    evolve(model, &init.states, grid, driver, replication, &MeanField::SelfConsistent)
}

/// Independent particles whose interaction term averages against `flow`.
pub fn simulate_against_flow<D: Dynamics>(
    model: &D,
    flow: &MeasureFlow,
    x0: &[f64],
    grid: &TimeGrid,
    driver: &NoiseDriver,
    replication: u32,
) -> Result<Trajectory> {
    flow.check_grid(grid)?;
    let summaries = flow.summaries(model);
    evolve(model, x0, grid, driver, replication, &MeanField::Frozen(summaries))
}
