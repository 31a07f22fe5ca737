//! Two-stage hierarchical multilabel classification engine.
//!
//! A document is encoded by a bidirectional LSTM. A first decoder predicts
//! parent codes with per-label attention over the token states, and a second
//! decoder predicts child codes by attending both to the token states and to
//! parent label embeddings scaled by the predicted parent probabilities.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints
//! and the command line live in the companion `twostage` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod hierarchy;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use hierarchy::LabelHierarchy;
pub use numerics::{Real, Tensor};
