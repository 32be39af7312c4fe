//! Experiment harness for `oqn-core`: run configs, CSV and JSON reports,
//! baselines, an exact trust-region oracle, randomized verification suites
//! and a parallel benchmark grid.

pub mod baselines;
pub mod bench;
pub mod brute_tr;
pub mod cli;
pub mod config;
pub mod report;
pub mod verify;
