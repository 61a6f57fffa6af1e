//! Empirical measures, transport costs, exact discrete optimal transport and
//! variation distances.

mod assignment;
mod cost;
mod empirical;
mod flow;
mod transport;
mod variation;

pub use assignment::solve_assignment;
pub use cost::{CostFunction, PairCost};
pub use empirical::EmpiricalMeasure;
pub use flow::solve_transportation;
pub use transport::{
    joint_product_transport, product_transport, solve_transport, transport_cost, w_phi, wasserstein_1d_sorted,
    wasserstein_p, TransportOptions, TransportPlan,
};
pub use variation::{weighted_variation, weighted_variation_samples, Binning, Histogram, DEFAULT_BINS};
