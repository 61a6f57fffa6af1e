//! Change-of-measure tools: Girsanov weights for drift discrepancies, the
//! exponential law of large numbers, and Harnack inequalities with power.

mod girsanov;
mod harnack;
mod lln;

pub use girsanov::{girsanov_weight, GirsanovWeight};
pub use harnack::{
    calibrate_harnack_constant, dini_harnack_exponent, dual_entropy_bound_check, gaussian_ratio_moment,
    gaussian_ratio_samples, harnack_check, heat_harnack_exponent, HarnackOutcome, HarnackPoint, HeatSemigroup,
    MomentCheck, MonteCarloSemigroup, Semigroup, SemigroupValue, TestFn,
};
pub use lln::{exp_lln_moment, ExpLlnOptions, MomentEstimate, LLN_SUP_BOUND};
