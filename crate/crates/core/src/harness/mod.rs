//! Monte Carlo experiments: empirical size and power over a grid of
//! dimensions and sample sizes, and convergence series for the trace
//! estimators.
//!
//! Each replication draws every group from its own keyed stream and runs all
//! configured tests on the same data. Replications are scheduled by an
//! [`Execution`] and gathered in index order, so output never depends on the
//! thread count.

mod config;
mod convergence;
mod exec;
mod run;
mod table;

pub use config::{CovarianceCase, SimConfig, SimTest, FULL_N_STAR_LIST, FULL_P_LIST, FULL_REPLICATIONS};
pub use convergence::{run_estimator_convergence, ConvergenceEstimator, ConvergenceSeries};
pub use exec::Execution;
pub use run::{
    cells, replicate_cell, run, run_asl, run_power, tally, Cell, CellResult, ReplicationRecord, SimMode, SimulationRun,
    TestTally,
};
pub use table::{emit_convergence, emit_table, Format};
