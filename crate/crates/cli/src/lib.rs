//! Job parsing and execution behind the `hahn` binary.

pub mod job;
pub mod run;

pub use job::{parse_job, CliError, Command, Defaults, Format, JobSpec, SeriesInput, Shape};
pub use run::{execute, run, Outcome};
