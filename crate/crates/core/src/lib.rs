//! In-context tabular inference for geotechnical data.
//!
//! The crate is organised around a fit-free kernel predictor that keeps its
//! training table as context and answers queries with class probabilities,
//! discretised posteriors and affinity embeddings. On top of it sit an
//! iterated conditional-mean imputer, permutation Shapley attribution and a
//! small deterministic SVG/CSV report layer.
//!
//! Data-parallel loops go through [`exec::Exec`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

pub mod data;
pub mod error;
pub mod exec;
pub mod explain;
pub mod imputation;
pub mod predictor;
pub mod report;

pub use error::{Error, Result};
pub use exec::Exec;
