//! Graph data augmentation toolkit with a self-contained GNN training
//! engine and benchmark harness.
//!
//! The crate is organized around six pieces:
//!
//! * [`graph`] — undirected graphs, derived matrices, dataset statistics
//! * [`augment`] — FDM, FANA, and the four baseline augmentations
//! * [`tensor`] — dense matrices with tape-based reverse-mode autodiff
//! * [`models`] — GCN, GraphSAGE, GAT, GIN layers and supervised training
//! * [`contrastive`] — two-view contrastive pretraining with NT-Xent
//! * [`harness`] — configs, multi-seed experiments, report tables

pub mod augment;
pub mod contrastive;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod models;
pub mod rng;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::DenseMatrix;
