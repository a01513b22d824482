//! Referential form selection workbench: corpus handling, discourse feature
//! extraction, from-scratch recurrent/attention models, probing classifiers
//! and a gradient-boosted tree baseline with feature importance.

// `!(x > y)` is used on purpose so NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod features;
pub mod importance;
pub mod models;
pub mod numkernel;
pub mod probing;
pub mod seed;
pub mod svg;
pub mod training;

pub use error::{Error, Result};
