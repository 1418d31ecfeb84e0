//! From per-window token embeddings to one vector per document.
//!
//! [`merge_window_embeddings`] picks, for every token position covered by two
//! windows, the copy computed with more surrounding context: the earlier half
//! of an overlap comes from the previous window and the later half from the
//! next one. [`pool_document`] then averages the token rows weighted by the
//! TF-IDF weight of the word each token belongs to.

mod merge;
mod pool;
mod tfidf;

pub use merge::{merge_plan, merge_window_embeddings, TokenEmbeddingSeq, WindowEmbeddings};
pub use pool::{pool_document, weighted_mean, DocVector, PooledDocument};
pub use tfidf::{fit_tfidf, TfIdfModel};
