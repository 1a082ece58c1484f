//! Files, experiment drivers, charts and the command line around
//! [`dcggm_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod plot;

pub use config::{NRule, RunConfig};
pub use error::{AppError, Result};
pub use experiment::{Mode, Report, ResultRow, Scenario};
