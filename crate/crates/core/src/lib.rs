//! Causal video object segmentation as a three-stage cascade: class-agnostic
//! proposals are gated around the previous box ([`opn`]), an online
//! appearance model picks and averages the best candidates ([`otn`]), and a
//! reference-guided segmenter predicts the mask inside the tracked box
//! ([`drsn`]). The learned parts sit behind backend traits; [`backends`]
//! ships oracle and classical colour-model implementations.

pub mod backends;
pub mod data;
pub mod drsn;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod opn;
pub mod otn;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
