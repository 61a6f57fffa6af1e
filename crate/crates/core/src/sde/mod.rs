//! Moduli of class 𝒜, model specifications, reproducible noise and the
//! Euler–Maruyama integrator.

mod euler;
mod grid;
mod law;
mod model;
mod modulus;
mod noise;

pub use euler::{euler_maruyama, euler_maruyama_with_increments, Path};
pub(crate) use euler::em_update;
pub use grid::TimeGrid;
pub use law::SampleLaw;
pub use model::{
    AuditReport, CombineFn, Diffusion, DriftFn, Interaction, LawSummary, MatrixFn, ModelConstants, ModelSpec, PairFn,
};
pub(crate) use model::{dist, norm};
pub use modulus::{make_modulus, ModulusFunction, ModulusKind, ScalarFn};
pub use noise::{Domain, NoiseDriver, NoiseStream};
#[cfg(test)]
pub(crate) use noise::splitmix64;
