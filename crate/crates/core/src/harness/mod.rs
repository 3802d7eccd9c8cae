//! Experiment harness: instance generation, trial execution, CSV output and run reports.
mod checks;
mod experiment;
mod instance;

pub use checks::*;
pub use experiment::*;
pub use instance::*;
