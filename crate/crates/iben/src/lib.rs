//! File formats, configuration, feature pipeline and command implementations
//! around [`iben_core`].

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod dataset;
mod error;
pub mod hsfile;
pub mod pipeline;
pub mod vectors;

pub use error::{Error, Result};
pub use iben_core as core;
