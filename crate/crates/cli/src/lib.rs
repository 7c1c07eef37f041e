//! Input/output helpers for the `fracvol` command-line tool.

pub mod config;
pub mod io;

pub use io::{ingest_prices, IngestError};
