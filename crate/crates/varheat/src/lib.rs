//! Experiments, file formats and the command-line front end for `varheat-core`.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod manifest;

pub use error::{AppError, AppResult};
