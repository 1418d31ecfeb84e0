use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::corpus::CleanDocument;
use crate::error::{Error, Result};

/// Document frequencies and smoothed inverse document frequencies.
///
/// `idf(t) = ln((1 + n) / (1 + df(t))) + 1`, which is finite and positive for
/// every term, including terms never seen during fitting (`df = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: BTreeMap<String, usize>,
    document_frequency: Vec<usize>,
    idf: Vec<f64>,
    num_docs: usize,
}

pub fn fit_tfidf(corpus: &[CleanDocument]) -> Result<TfIdfModel> {
    if corpus.is_empty() {
        return Err(Error::contract("cannot fit TF-IDF on an empty corpus"));
    }
    let term_sets: Vec<BTreeSet<&str>> = corpus
        .par_iter()
        .map(|doc| doc.words().iter().map(String::as_str).collect())
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for set in &term_sets {
        for term in set {
            *df.entry(term).or_default() += 1;
        }
    }

    let num_docs = corpus.len();
    let mut vocabulary = BTreeMap::new();
    let mut document_frequency = Vec::with_capacity(df.len());
    let mut idf = Vec::with_capacity(df.len());
    for (i, (term, count)) in df.into_iter().enumerate() {
        vocabulary.insert(term.to_string(), i);
        document_frequency.push(count);
        idf.push(smoothed_idf(num_docs, count));
    }
    Ok(TfIdfModel {
        vocabulary,
        document_frequency,
        idf,
        num_docs,
    })
}

fn smoothed_idf(num_docs: usize, df: usize) -> f64 {
    ((1.0 + num_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl TfIdfModel {
    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    /// Number of fitted documents containing `term` (0 if unseen).
    pub fn document_frequency(&self, term: &str) -> usize {
        self.term_index(term)
            .map_or(0, |i| self.document_frequency[i])
    }

    pub fn idf(&self, term: &str) -> f64 {
        match self.term_index(term) {
            Some(i) => self.idf[i],
            None => smoothed_idf(self.num_docs, 0),
        }
    }

    /// Raw count of `term` in `doc` times its idf.
    pub fn weight(&self, term: &str, doc: &CleanDocument) -> f64 {
        let count = doc.words().iter().filter(|w| *w == term).count();
        if count == 0 {
            0.0
        } else {
            count as f64 * self.idf(term)
        }
    }

    /// Weight of every word position of `doc`, computed with one counting pass.
    pub fn word_weights(&self, doc: &CleanDocument) -> Vec<f64> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in doc.words() {
            *counts.entry(w.as_str()).or_default() += 1;
        }
        doc.words()
            .iter()
            .map(|w| counts[w.as_str()] as f64 * self.idf(w))
            .collect()
    }
}
