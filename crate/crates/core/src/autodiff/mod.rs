//! Dense `f64` tensors with tape-based reverse-mode differentiation.
//!
//! Operations are recorded on a [`Tape`] as they execute; [`Tape::backward`]
//! walks the records once, newest first. Every op refuses to produce a
//! non-finite value.

mod check;
mod params;
mod tape;
mod tensor;

pub use check::{grad_check, relative_error, GradCheckOptions, GradCheckReport, ParamCheck, DEFAULT_EPS};
pub use params::{Binding, ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
