//! The `N`-particle system, the McKean–Vlasov limit by Picard iteration over
//! empirical measure flows, and synchronously coupled reference copies.
//!
//! Everything here is generic over [`Dynamics`], which both the
//! finite-dimensional [`ModelSpec`](crate::sde::ModelSpec) and the spectral
//! SPDE model implement.

mod coupled;
mod dynamics;
mod picard;
mod system;

pub use coupled::{run_coupled, CoupledRun, Pairing};
pub use dynamics::{Dynamics, StepWork};
pub use picard::{flow_gap, solve_mkv_picard, MeasureFlow, PicardOptions, PicardStart};
pub use system::{simulate_against_flow, simulate_ips, Ensemble, Trajectory};
