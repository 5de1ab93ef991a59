//! Multi-agent minimum time search planning.
//!
//! Builds a search graph from a segmented map, keeps a probabilistic belief
//! about a static target, and plans per-agent search paths with a MAX-MIN ant
//! system that minimizes the expected time to detection. Per-agent sub-priors
//! let a human steer which agent searches where.

pub mod aco;
pub mod belief;
pub mod error;
pub mod geometry;
pub mod grid_world;
pub mod problem;
pub mod sensing;
pub mod sim;

pub use error::{Error, Result};
