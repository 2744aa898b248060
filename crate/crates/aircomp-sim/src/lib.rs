//! Experiment harness, configuration, and output formats for the AirComp
//! cell-free massive MIMO simulator; the `aircomp` binary is a thin CLI
//! wrapper over this crate.

pub mod config;
pub mod harness;
pub mod output;
pub mod selftest;
