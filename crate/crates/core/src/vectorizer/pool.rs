use serde::{Deserialize, Serialize};

use super::{TfIdfModel, TokenEmbeddingSeq};
use crate::corpus::CleanDocument;
use crate::error::{Error, Result};
use crate::linalg::norm;

/// Pooled document representation; stored unnormalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocVector {
    pub doc_id: String,
    pub vector: Vec<f64>,
    pub norm: f64,
}

impl DocVector {
    pub fn new(doc_id: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        if let Some(pos) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { position: pos });
        }
        let norm = norm(&vector);
        Ok(Self {
            doc_id: doc_id.into(),
            vector,
            norm,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledDocument {
    pub vector: DocVector,
    /// Every weight was zero and the plain mean was used instead.
    pub unweighted_fallback: bool,
}

/// `sum(w_i * row_i) / sum(w_i)`, falling back to the plain mean when all
/// weights are zero. Returns the pooled vector and whether the fallback fired.
pub fn weighted_mean<'a, I>(rows: I, weights: &[f64], dim: usize) -> Result<(Vec<f64>, bool)>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let rows: Vec<&[f32]> = rows.into_iter().collect();
    if rows.is_empty() {
        return Err(Error::contract("cannot pool zero rows"));
    }
    if rows.len() != weights.len() {
        return Err(Error::contract(format!(
            "{} rows but {} weights",
            rows.len(),
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::contract(format!("invalid pooling weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    let fallback = total == 0.0;

    let mut acc = vec![0.0f64; dim];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::contract(format!(
                "row {i} has dimension {}, expected {dim}",
                row.len()
            )));
        }
        let w = if fallback { 1.0 } else { weights[i] };
        if w == 0.0 {
            continue;
        }
        for (a, &x) in acc.iter_mut().zip(row.iter()) {
            *a += w * f64::from(x);
        }
    }
    let denom = if fallback { rows.len() as f64 } else { total };
    acc.iter_mut().for_each(|a| *a /= denom);
    Ok((acc, fallback))
}

/// TF-IDF weighted mean of a document's token rows.
///
/// Each subword row takes the weight of the word it is aligned to; rows
/// aligned to special tokens are skipped.
pub fn pool_document(
    seq: &TokenEmbeddingSeq,
    doc: &CleanDocument,
    model: &TfIdfModel,
) -> Result<PooledDocument> {
    if seq.is_empty() {
        return Err(Error::EmptyDocument(seq.doc_id().to_string()));
    }
    let word_weights = model.word_weights(doc);
    let mut rows = Vec::with_capacity(seq.len());
    let mut weights = Vec::with_capacity(seq.len());
    for (pos, &word) in seq.alignment().iter().enumerate() {
        let Ok(word) = usize::try_from(word) else {
            continue;
        };
        let row = seq.row(pos);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { position: pos });
        }
        let weight = *word_weights.get(word).ok_or_else(|| {
            Error::contract(format!(
                "document {:?}: position {pos} aligned to word {word} but the document has {} words",
                seq.doc_id(),
                word_weights.len()
            ))
        })?;
        rows.push(row);
        weights.push(weight);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDocument(seq.doc_id().to_string()));
    }
    let (vector, unweighted_fallback) = weighted_mean(rows, &weights, seq.dim())?;
    Ok(PooledDocument {
        vector: DocVector::new(seq.doc_id(), vector)?,
        unweighted_fallback,
    })
}
