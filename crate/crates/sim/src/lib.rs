//! Host side of the simulator: the live protocol server used by the
//! `pmrball` binary.

pub mod serve;

pub use serve::{serve, ServeError, ServeOptions, Server};
