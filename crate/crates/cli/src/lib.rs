//! Dataset I/O, run configuration and the alternating refinement driver
//! behind the `semref` command.

pub mod config;
pub mod io;
pub mod pipeline;
