//! Experiment harness for nested random-walk approximations: runs the
//! convergence, quadratic-variation, approximation and independence
//! experiments, fits rates, checks bound envelopes and renders reports.

pub mod config;
pub mod dump;
pub mod error;
pub mod experiments;
pub mod indep;
pub mod report;
pub mod stats;

pub use config::{ExperimentConfig, Format};
pub use error::{HarnessError, Result};
pub use report::ExperimentReport;
