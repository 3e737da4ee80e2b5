//! File formats, threaded scheduling and the `pglearn` command line on top of
//! [`pglearn_core`].

#![deny(missing_docs)]

pub mod cli;
pub mod error;
pub mod io;
pub mod output;
pub mod runspec;
pub mod workers;

pub use error::{CliError, Result};
