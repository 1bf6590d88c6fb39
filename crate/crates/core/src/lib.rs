//! Gossip interactive Kalman filtering: sensors on a network run local
//! Kalman filters and swap their filter states along random matchings.
//!
//! The crate simulates such networks, certifies weak detectability through
//! walk Grammians, and samples the invariant law of the resulting switched
//! Riccati iterates. Start with [`harness::reference`] for ready-made
//! experiments or [`filter::run_gikf`] for a single run.

pub mod detect;
pub mod error;
pub mod filter;
pub mod harness;
pub mod matrix;
pub mod measure;
pub mod network;
pub mod seed;

pub use error::{GikfError, Result};
