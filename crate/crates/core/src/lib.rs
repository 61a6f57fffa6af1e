//! Numerical laboratory for mean-field interacting particle systems and their
//! McKean–Vlasov limits.
//!
//! The crate simulates the `N`-particle system, the limit law (by Picard
//! iteration over empirical measure flows) and synchronously coupled
//! reference copies, and measures how fast the particle system approaches
//! the limit in transport costs, relative entropy and variation distance.
//! It also checks the exponential law of large numbers, Girsanov
//! reweighting and Harnack inequalities that control those rates, and
//! provides a spectral-Galerkin version for semilinear SPDEs.
//!
//! Parallel loops go through [`exec`]; disable the default `parallel`
//! feature for a purely sequential build with identical results.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity, clippy::manual_is_multiple_of)]

pub mod changemeasure;
pub mod entropy;
pub mod error;
pub mod exec;
pub mod harness;
pub mod meanfield;
pub mod measures;
pub mod quad;
pub mod sde;
pub mod spde;
pub mod stats;

pub use error::{Error, Result};
