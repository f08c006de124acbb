//! Minimal dense-tensor algebra with tape-based reverse-mode autodiff.
//!
//! Everything the model computes is expressed through [`Tape`] operations on
//! [`Tensor`] values; [`grad_check`] compares recorded backward rules against
//! central finite differences.

mod check;
mod tensor;
mod tape;

#[cfg(test)]
mod tests;

pub use check::{grad_check, grad_check_against, GRAD_CHECK_FLOOR};
pub use tensor::{NumericsError, Tensor};
pub use tape::{Gradients, Tape, VarId};
