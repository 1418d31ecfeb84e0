//! Long-document embedding and clustering pipeline.
//!
//! Documents are cleaned and word-tokenized ([`corpus`]), cut into fixed-length
//! token windows with return-token overlap ([`chunker`]), embedded by an external
//! provider, reconciled into one embedding per token and pooled into a TF-IDF
//! weighted document vector ([`vectorizer`]). Document vectors are grouped with
//! seeded k-means and an elbow-selected K ([`clusterer`]) and the resulting groups
//! are scored with cosine-similarity statistics ([`evaluator`]).
//!
//! Transformer inference itself lives outside this crate. Embeddings arrive
//! either through the binary interchange format ([`interchange`]) or from one of
//! the deterministic stub providers in [`provider`].

pub mod chunker;
pub mod clusterer;
pub mod corpus;
pub mod error;
pub mod evaluator;
mod hashing;
pub mod interchange;
pub mod linalg;
pub mod provider;
pub mod synthetic;
pub mod vectorizer;

pub use error::{Error, Result};
pub use linalg::Matrix;
