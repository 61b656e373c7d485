//! Thompson Sampling over a finite parameter space when the assumed reward
//! model does not contain the true data-generating process.
//!
//! The crate is split along the lines of the analysis:
//!
//! - [`reward_models`]: the assumed quadratic family, the true processes, and grid argmax helpers.
//! - [`posterior`]: log-domain posterior over the finite parameter space.
//! - [`thompson`]: the sampling loop and per-step regret accounting.
//! - [`pseudo_truth`]: static KL fit analysis, the pseudo-truth set and the concentration constants.
//! - [`overshadow_graph`]: the overshadowing digraph, closed/strongly connected sets and joint closure.
//! - [`experiments`]: configuration, Monte Carlo aggregation, rate fitting and file output.

pub mod error;
pub mod experiments;
pub mod overshadow_graph;
pub mod posterior;
pub mod pseudo_truth;
pub mod reward_models;
pub mod thompson;

pub use error::{Error, Result};
pub use posterior::Posterior;
pub use reward_models::{ActionGrid, DgpKind, FamilyKind, ModelFamily, ParamSpace, TrueDgp};
pub use thompson::{Scenario, StepRecord, Trace};
