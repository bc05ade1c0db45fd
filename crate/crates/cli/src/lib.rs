//! Library surface of the experiment driver, shared by the `complearn`
//! binary and the integration tests.

pub mod config;
pub mod diagnose;
pub mod experiment;
pub mod plot;
pub mod trace;
