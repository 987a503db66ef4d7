//! File formats, configuration and the `misig` command line built on
//! [`misig_core`].

pub mod bagspec;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod pipeline;
pub mod transform;

pub use error::{Error, Result};
