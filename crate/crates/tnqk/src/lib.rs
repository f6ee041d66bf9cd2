//! Exact tensor-network simulation of block-product-state quantum fidelity
//! kernels, combined with a classical RBF kernel and an SMO-based SVM into a
//! quantum–classical dual-kernel classification pipeline.
//!
//! The crate is organized around six building blocks:
//!
//! - [`preprocess`]: standardize → PCA → min–max feature chain
//! - [`circuit`]: block-product-state feature-map circuits and their
//!   compute–uncompute overlap composites
//! - [`tensornet`]: exact amplitude evaluation (dense statevector oracle,
//!   block-factorized fast path, greedy tensor-graph contraction)
//! - [`kernels`]: Gram matrix construction (quantum, classical RBF, convex
//!   mixes), persistence, and concentration diagnostics
//! - [`svm`]: SMO dual solver, decision function, one-vs-one multiclass,
//!   classification metrics
//! - [`pipeline`]: dataset loading, splits, cross-validated hyperparameter
//!   selection, experiment sweeps, and reporting

pub mod circuit;
pub mod error;
pub mod kernels;
pub mod matrix;
pub mod pipeline;
pub mod preprocess;
pub mod svm;
pub mod tensornet;

pub use error::{Error, Result};
pub use matrix::Matrix;
