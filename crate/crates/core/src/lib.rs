// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod coupling;
pub mod error;
pub mod estimate;
pub mod model;
pub mod paths;
pub mod seeding;
pub mod verify;

pub use error::{Error, Result};
