//! Config ingestion, experiment execution and CSV emission for the `hcran`
//! binary.

pub mod app;
pub mod config;
pub mod output;
