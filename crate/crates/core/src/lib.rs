//! Parametric neighborhood-embedding engine.
//!
//! Implements ParamRepulsor and a family of contrastive baselines
//! (ParamPaCMAP, parametric UMAP, Neg-t-SNE, Info-NC-t-SNE, NCVis) on top of
//! a hand-rolled MLP projector trained by mini-batch Adam. The crate also
//! ships the evaluation metrics used to compare embeddings and the exact
//! false-negative probability calculus behind mid-near hard-negative
//! sampling.

pub mod data;
pub mod error;
pub mod fnanalysis;
pub mod losses;
pub mod metrics;
pub mod nncore;
pub mod pairs;
pub mod plot;
pub mod trainer;

pub use error::{Error, Result};
