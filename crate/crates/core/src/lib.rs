// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod error;
pub mod kernel;
pub mod objective;
pub mod quadrature;
pub mod solver;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
