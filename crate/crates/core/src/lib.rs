//! Distributed stochastic annealing for cooperative aggregative games over
//! random communication graphs.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annealing;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod game;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod plot;
pub mod schedule;
pub mod topology;
pub mod trace;

pub use error::{Error, Result};
