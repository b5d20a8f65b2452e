//! Configuration, file formats and the command implementations behind the
//! `photon-packets` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod protocol_file;
pub mod series;

pub use config::{Overrides, RunConfig};
pub use protocol_file::{parse_protocol, write_protocol};
pub use series::read_series;
