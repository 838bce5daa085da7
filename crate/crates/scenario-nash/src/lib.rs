//! File formats, experiment harness and command-line front end for
//! [`scenario_nash_core`].
//!
//! * [`io`]: the EV instance JSON and CSV writers.
//! * [`config`]: the JSON experiment configuration.
//! * [`experiments`]: certificate tables, compression-size sweeps and
//!   convergence traces.

pub mod config;
pub mod experiments;
pub mod io;

pub use config::ExperimentConfig;
