//! Harness around the `locg` solvers: sweeps, traces, tables, plots and
//! per-iteration verification.

pub mod manifest;
pub mod plot;
pub mod run;
pub mod sigma_table;
pub mod tracefile;
pub mod verify;

pub use manifest::{ManifestArgs, RunManifest, Triple, UsageError};
