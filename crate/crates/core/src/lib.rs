//! Agnostic hypothesis selection over finite domains.

// `!(x > 0.0)` is used on purpose so that NaN lands on the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy_player;
pub mod error;
pub mod games;
pub mod harness;
pub mod geometry;
mod lp;
pub mod model;
pub mod sampling;
pub mod selectors;

pub use error::{Error, Result};
