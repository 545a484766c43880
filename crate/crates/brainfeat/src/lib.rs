//! File formats, configuration and the command-line pipeline around
//! `brainfeat-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod manifest;
pub mod matrix_io;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use error::Error;
