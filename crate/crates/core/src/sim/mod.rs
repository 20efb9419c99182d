//! Data-generating processes, the minimal Kullback-Leibler point, and
//! replicated simulation studies of interval coverage.

mod dgp;
mod grid;
mod harness;
mod kl;
pub mod table;

pub use dgp::{generate, generate_sized, CovariateLaw, DgpKind, DgpSpec, DEFAULT_CENSOR_TIME};
pub use grid::{grid, run_grid, GridOptions, Scenario, GRID_NAMES};
pub use harness::{
    aggregate, run_fixed_design, run_replicate, run_scenario, run_scenario_with_kl,
    ReplicateResult, SimConfig, SimReport, MAX_FAILED_FRACTION, SLOPE,
};
pub use kl::{kl_point, kl_point_with, KlPoint, POISSON_ORACLE_N, WEIBULL_ORACLE_N};
