//! Deep block-sparse auto-encoder for non-rigid structure from motion.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod sparse;
pub mod train;

pub use error::{Error, Result};
