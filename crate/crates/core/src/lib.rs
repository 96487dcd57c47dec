//! Core of the IBEN headline funniness regressor.
//!
//! Everything here needs only an allocator: headline records and token
//! preprocessing, word-vector tables, encoder layer fusion, a small
//! reverse-mode autodiff engine, the two-branch network and its Adam
//! training loop. File formats, configuration and the command line live in
//! the `iben` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod autodiff;
pub mod bertfuse;
pub mod corpus;
mod error;
mod hash;
pub mod model;
pub mod train;
pub mod wordvec;

pub use error::{Error, Result};
