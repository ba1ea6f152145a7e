//! Discrete-event simulation of a dynamic kidney exchange platform.
//!
//! Pairs arrive and leave over time, a match run solves the current pool at
//! fixed intervals with either the conventional optimum or the greedy
//! selection, and matched cycles pass crossmatch tests and acceptance
//! before transplantation. Failed cycles return to the pool after a delay.

pub mod compare;
pub mod config;
pub mod engine;
pub mod pool;
pub mod solver;

pub use compare::{
    compare_grid, read_csv, run_pair, sign_test, summarize, write_csv, CellSummary, PairedRun,
    SignTest,
};
pub use config::{ConfigError, GridConfig, Model, RuntimeModel, SimConfig, TimeDistribution};
pub use engine::{run_sim, shuffle_for_run, PairSource, PairState, RunRecord, SimError, SimResult};
pub use solver::{conventional_match, greedy_match, SolveError};
