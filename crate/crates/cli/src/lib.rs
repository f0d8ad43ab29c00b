//! Experiment runner for `qwass`: a catalog of named experiments, a flat config format,
//! CSV/JSON records and a verifier that recomputes pass/fail from stored records.

pub mod app;
pub mod catalog;
pub mod config;
pub mod experiments;
pub mod record;
