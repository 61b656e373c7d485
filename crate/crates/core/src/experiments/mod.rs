//! Experiment configuration, Monte Carlo runs, aggregation and file output.

pub mod aggregate;
pub mod config;
pub mod emit;
pub mod fit;
pub mod monte_carlo;

pub use aggregate::AggregateSeries;
pub use config::{ConfigCopy, ExperimentConfig, ParamSpaceSpec, ResolvedConfig, SigmaMode};
pub use emit::{write_outputs, OutputFile};
pub use fit::{fit_exponential_rate, fit_log_rate, verify_bound, BoundReport, RateFit};
pub use monte_carlo::{monte_carlo, monte_carlo_scenario, ActionHistogram, MonteCarloResult};
