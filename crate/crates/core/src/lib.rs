//! Fairness-aware online batch selection for training under label bias.
//!
//! A model is trained on small sub-batches chosen from larger candidate
//! batches. Candidates are ranked by a score that combines the current
//! training loss with the loss of a proxy model and a peer term computed
//! from the label distribution of the other sensitive group; the chosen
//! sub-batch can then be rebalanced across (group, label) cells.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod proxy;
pub mod report;
pub mod resample;
pub mod rng;
pub mod selection;
pub mod trainer;

pub use error::{Error, Result};
