//! Noisy-label learning laboratory.
//!
//! A two-phase pipeline over a small feedforward classifier: hard-sample-aware
//! label correction (easy/hard/noisy detection from per-sample training
//! histories, a correction model and a post-processing filter), followed by
//! noise-suppressing co-learning in which an EMA teacher picks low-confidence
//! samples to discard and focal loss up-weights hard samples.

pub mod config;
pub mod correction;
pub mod data;
pub mod ehn;
pub mod error;
pub mod history;
pub mod metrics;
pub mod netcore;
pub mod nshe;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};
