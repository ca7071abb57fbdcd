//! Command line and HTTP front ends for the dforge pipeline.

pub mod cli;
pub mod http;
pub mod repo;
pub mod service;

pub use cli::run;

/// Template id recorded for plans registered without one.
pub const DEFAULT_TEMPLATE_ID: &str = "template";
