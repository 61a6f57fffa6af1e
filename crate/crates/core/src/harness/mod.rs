//! Config-driven convergence studies, rate fitting, check suites and
//! persistence.

mod checks;
mod config;
mod fit;
mod models;
mod output;
mod study;

pub use checks::{check_suite, CheckItem, CheckReport, Suite};
pub use config::{CouplingConfig, EstimatorConfig, GridConfig, ModelId, SpdeConfig, StudyConfig};
pub use fit::{rate_fit, RateFit};
pub use models::{build_model, default_init, RegisteredModel};
pub use output::{
    config_hash, read_rows, render_report, rows_to_csv, write_simulation, write_study, Metadata, CSV_HEADER,
    SIMULATION_CSV, STUDY_CSV, STUDY_JSON,
};
pub use study::{
    run_study, simulate, Fingerprint, FitRow, FlowSummary, Row, SimulationRecord, StudyResult, FLAG_FLOORED,
    FLAG_PROJECTION, FLAG_PROXY, FLOW_TAG,
};
