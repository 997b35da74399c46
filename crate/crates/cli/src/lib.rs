//! Configuration, output and orchestration for the `onsager-flow` binary.

pub mod config;
pub mod output;
pub mod sim;
