//! Robust Nash equilibria of scenario-based noncooperative games.
//!
//! Agents minimise a private cost plus the worst case, over a finite sample of
//! uncertainty realisations, of a shared uncertain cost. The worst case is
//! replaced by a coordinator that picks weights on the probability simplex,
//! and the resulting min-max game is solved with a decentralised proximal
//! scheme ([`solver::solve_ne`]). The weights returned by the coordinator
//! expose a compression set of the sample ([`compression`]), whose size feeds
//! the probabilistic robustness bounds in [`certificate`]. Empirical
//! violation estimates live in [`validation`].
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! experiment harness live in the `scenario-nash` crate.
#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod certificate;
pub mod compression;
pub mod error;
pub mod ev;
pub mod game;
mod num;
pub mod projection;
pub mod rng;
pub mod solver;
pub mod subproblem;
pub mod validation;

pub use certificate::{Certificate, CertificateKind};
pub use compression::{CompressionMethod, CompressionReport, Verification};
pub use error::{Error, Result};
pub use ev::{EvGame, EvScenario, EvScenarioSampler, FeasibleSet};
pub use game::{AugmentedPoint, ScenarioGame, ScenarioSet, SimplexWeights, StrategyProfile};
pub use solver::{InitRule, NeSolution, SolveTrace, SolverConfig, StopRule};
pub use validation::{ScenarioSampler, ViolationEstimate, ViolationKind};
