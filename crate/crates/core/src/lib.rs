//! Sparse-sampled FMCW radar quantitative imaging.
//!
//! The crate synthesizes stepped-frequency echoes of 2-D RCS maps seen by a
//! four-element array, reconstructs them with fixed-step FISTA, and trains an
//! unrolled L-FISTA network with a small residual refinement head.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fista;
pub mod forward;
pub mod geometry;
pub mod mnist;
pub mod model;
pub mod train;

pub use error::{Error, Result};
