//! Hybrid channel allocation toolkit.
//!
//! Turns per-base-station traffic statistics into probability vectors,
//! computes fixed-channel plans with five allocation strategies, evaluates
//! plans against a hybrid fixed + dynamic-pool blocking simulator, and
//! trains a small feed-forward network to predict the traffic parameters
//! the allocators consume.

pub mod allocators;
pub mod error;
pub mod mlp;
pub mod plan;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
