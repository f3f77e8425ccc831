//! Thresholded alternating minimization (TAM) for low-rank matrix completion
//! from entries sampled on a union of random bipartite d-regular graphs.

pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod regularizers;
pub mod seed;
pub mod sparse;
pub mod synth;
pub mod tam;

pub use error::{Result, TamError};
