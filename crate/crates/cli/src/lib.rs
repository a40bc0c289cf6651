//! Library surface of the experiment runner: config parsing, experiment
//! dispatch, and the Pubmed native-format converter. The `semnet` binary is
//! a thin wrapper over these.

pub mod config;
pub mod experiments;
pub mod pubmed;
