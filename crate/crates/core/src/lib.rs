//! Fractal Gaussian Networks: chaos-measure simulation, graph generation,
//! motif and spectral statistics, fractality estimation and detection.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod field;
pub mod fractal;
pub mod generate;
pub mod gmc;
pub mod graph;
pub mod inference;
pub mod ingest;
pub mod kernel;
pub mod motifs;
pub mod seed;
pub mod spectral;

pub use error::{FgnError, Result};
