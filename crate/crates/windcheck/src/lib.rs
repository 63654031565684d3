//! Files, configuration and the command-line tool around `windcheck-core`.

pub mod cli;
pub mod config;
pub mod explicit;
pub mod simulate;
pub mod sweep;
