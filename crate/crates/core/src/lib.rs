//! Explanations for graph convolutional networks that are both necessary and
//! sufficient, found by maximising a lower bound on the probability of
//! necessity and sufficiency over relaxed edge and feature masks.

pub mod datasets;
pub mod error;
pub mod explain;
pub mod export;
pub mod gcn;
pub mod graph;
pub mod metrics;
pub mod optim;
pub mod presets;
pub mod train;

pub use error::{Error, Result};
