//! Multi-interest sequential preference model: interaction encoding,
//! per-cluster attention, learned interest weights, and the training and
//! evaluation machinery around them.

pub mod error;

pub mod attention;
pub mod checkpoint;
pub mod clustering;
pub mod config;
pub mod data;
pub mod encoding;
pub mod experiments;
pub mod ffn;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod preference;
pub mod training;

pub use error::{Error, Result};
