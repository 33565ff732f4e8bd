#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod image;
pub mod matcher;
pub mod optimizer;
pub mod rectification;
pub mod scorer;
pub mod synth;

pub use error::{Error, Result};
