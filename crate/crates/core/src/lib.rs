//! Sequential repository recommendation.
//!
//! The pipeline builds a topic-similarity graph over repositories, embeds it
//! with a deep autoencoder, fuses the embeddings with popularity counts and
//! ranks the next repository of a user with a GRU over their recent history.
//! [`eval`] holds the offline protocol: chronological splits, top-N metrics,
//! sparsity simulation and two reference baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod graph;
pub mod pipeline;
pub mod gru;
pub mod sdne;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
