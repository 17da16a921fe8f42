//! Command-line driver and JSON-over-HTTP service for `dtsim-core`. Both go
//! through the same core calls, so identical inputs give identical metrics.

pub mod commands;
pub mod server;

pub use commands::{exit_code, Overrides};
pub use server::router;
