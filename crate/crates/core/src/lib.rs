//! Evidence (marginal likelihood) estimation by adapting likelihood levels.
//!
//! The evidence is written as an integral over likelihood levels of the prior
//! mass above each level. Three estimators of that mass are provided
//! ([`lla_is`], [`lla_ss`], [`lla_mcmc`]) alongside plain Monte Carlo and
//! nested sampling baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod accumulator;
pub mod baselines;
pub mod error;
pub mod lla_is;
pub mod lla_mcmc;
pub mod lla_ss;
pub mod models;
pub mod numerics;
pub mod prior;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod selection;
pub mod trace;

pub use baselines::{run_mc, run_nested, NestedConfig};
pub use error::{EvidenceError, Result};
pub use lla_is::{run_lla_is, IsConfig, IsdSpread};
pub use lla_mcmc::{run_lla_mcmc, KernelConfig, McmcConfig, ProposalScale};
pub use lla_ss::{run_lla_ss, SsConfig};
pub use models::{make_benchmark, Benchmark, BenchmarkName};
pub use prior::MarginalPrior;
pub use problem::BayesianProblem;
pub use schedule::{FractionSchedule, LevelPolicy, StoppingPolicy};
pub use selection::{log_bayes_factor, posterior_model_probabilities, ModelSet};
pub use trace::{EvidenceEstimate, LevelTrace, TerminationReason, Warning};
