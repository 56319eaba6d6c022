//! Semantic labeling of arterial trees by edge-attention graph matching.

pub mod assignment;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod graph;
pub mod io;
pub mod model;
pub mod numerics;
pub mod pgm;
pub mod pipeline;
pub mod rng;
pub mod skeleton;
pub mod synthetic;

pub use error::{Error, Result};
