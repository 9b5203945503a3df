//! Library side of the `scarmet` command: configuration, job planning,
//! caching and the staged runner.

pub mod cache;
pub mod config;
pub mod jobs;
pub mod runner;

pub use cache::{cache_key, Cache};
pub use config::{load, Experiment, RunConfig};
pub use jobs::{plan, Job, JobOutput};
pub use runner::{run, RunReport};
