//! Link-level simulator for distributed-MIMO uplink reception: null-space
//! interference suppression, an eigendecomposition-accelerated iterative
//! soft-cancellation detector, LDPC coding and a Monte Carlo harness.

pub mod coding;
pub mod detector;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod receiver;
pub mod rng;
pub mod softmaps;
pub mod suppression;
pub mod system_model;

pub use error::{Error, Result};
