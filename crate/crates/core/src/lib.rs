//! Multilevel Monte Carlo toolkit.
//!
//! The crate covers the full a-priori MLMC workflow on a resolution ladder
//! whose resolution doubles per level and whose cost falls by a factor of 8
//! per level:
//!
//! - [`hierarchy`]: the level ladder and its degrees-of-freedom law.
//! - [`stats`]: sample statistics, the telescoping estimator, and estimation
//!   of the standard deviation, convergence rate and fine-level error.
//! - [`planner`]: level counts and per-level sample sizes for classical MC and
//!   the four allocation strategies, with error bounds and predicted loads.
//! - [`executor`]: deterministic, parallel execution of coupled ensembles.
//! - [`models`]: built-in quantity-of-interest models (GBM, viscous Burgers,
//!   synthetic two-scale) and the random bottom-topography field.
//! - [`cli`]: the `mlmc` command-line front end.

pub mod cli;
pub mod error;
pub mod executor;
pub mod hierarchy;
pub mod models;
pub mod planner;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
pub use executor::{Executor, QoIModel, RunReport};
pub use hierarchy::{relative_dof, ResolutionHierarchy};
pub use planner::{LevelPlan, StrategyId};
pub use stats::SolutionParameters;
