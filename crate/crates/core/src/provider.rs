//! Sources of per-window token embeddings.
//!
//! Real transformer embeddings are produced outside this crate and read back
//! through [`InterchangeProvider`]. [`StubTokenizer`] and [`StubProvider`] are
//! deterministic stand-ins that let the whole pipeline run without a model.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::thread;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::chunker::{inference_windows, SlotSpec, TokenizedDocument, Window};
use crate::corpus::CleanDocument;
use crate::error::{Error, Result};
use crate::hashing::{fnv1a, mix64};
use crate::interchange::{read_record_file, InterchangeRecord};
use crate::vectorizer::{
    merge_window_embeddings, pool_document, PooledDocument, TfIdfModel, TokenEmbeddingSeq,
    WindowEmbeddings,
};

pub trait EmbeddingProvider: Sync {
    fn name(&self) -> &str;

    fn dimension(&self) -> usize;

    /// Embeds the given windows of `doc`, one matrix per window, in order.
    /// Rows cover content tokens only.
    fn embed(&self, doc: &TokenizedDocument, windows: &[Window]) -> Result<Vec<WindowEmbeddings>>;
}

/// Windows a document, embeds every window and merges the overlaps.
pub fn embed_document<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    doc: &TokenizedDocument,
    spec: SlotSpec,
) -> Result<TokenEmbeddingSeq> {
    let windows = inference_windows(doc, spec)?;
    let embedded = provider.embed(doc, &windows)?;
    if embedded.len() != windows.len() {
        return Err(Error::Provider {
            doc_id: doc.doc_id().to_string(),
            message: format!(
                "returned {} matrices for {} windows",
                embedded.len(),
                windows.len()
            ),
        });
    }
    merge_window_embeddings(doc.doc_id(), &embedded, doc.alignment().to_vec())
}

/// Embeds, merges and pools every document, in parallel and in input order.
/// `tokenized[i]` must be the tokenization of `docs[i]`.
pub fn vectorize_documents<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    docs: &[CleanDocument],
    tokenized: &[TokenizedDocument],
    model: &TfIdfModel,
    spec: SlotSpec,
) -> Result<Vec<PooledDocument>> {
    if docs.len() != tokenized.len() {
        return Err(Error::contract(format!(
            "{} documents but {} tokenizations",
            docs.len(),
            tokenized.len()
        )));
    }
    docs.par_iter()
        .zip(tokenized)
        .map(|(doc, tokens)| {
            if doc.id() != tokens.doc_id() {
                return Err(Error::contract(format!(
                    "tokenization of {:?} paired with document {:?}",
                    tokens.doc_id(),
                    doc.id()
                )));
            }
            let seq = embed_document(provider, tokens, spec)?;
            pool_document(&seq, doc, model)
        })
        .collect()
}

/// Ids below this value are reserved for special tokens.
pub const RESERVED_IDS: u32 = 5;

/// Word-piece-like tokenizer for tests and model-free runs.
///
/// Words longer than `piece_len` characters are split into consecutive pieces;
/// every piece maps to a hashed id in `RESERVED_IDS..vocab_size`.
#[derive(Debug, Clone, Copy)]
pub struct StubTokenizer {
    pub vocab_size: u32,
    pub piece_len: usize,
}

impl Default for StubTokenizer {
    fn default() -> Self {
        Self {
            vocab_size: 30_000,
            piece_len: 6,
        }
    }
}

impl StubTokenizer {
    pub fn token_id(&self, piece: &str, continuation: bool) -> u32 {
        let span = u64::from(self.vocab_size.saturating_sub(RESERVED_IDS).max(1));
        let h = fnv1a(piece.as_bytes()) ^ if continuation { 0x5bd1_e995 } else { 0 };
        RESERVED_IDS + (mix64(h) % span) as u32
    }

    pub fn tokenize(&self, doc: &CleanDocument) -> TokenizedDocument {
        let piece_len = self.piece_len.max(1);
        let mut tokens = Vec::new();
        let mut alignment = Vec::new();
        for (w, word) in doc.words().iter().enumerate() {
            let chars: Vec<char> = word.chars().collect();
            for (p, piece) in chars.chunks(piece_len).enumerate() {
                let piece: String = piece.iter().collect();
                tokens.push(self.token_id(&piece, p > 0));
                alignment.push(w as i32);
            }
        }
        TokenizedDocument::new(doc.id(), tokens, alignment)
            .expect("word indices are increasing by construction")
    }
}

/// Deterministic pseudo-contextual embeddings.
///
/// Each token id owns a fixed Gaussian vector; a row is that vector plus
/// `context` times the mean vector of the tokens within two positions inside
/// the same window, so a token's row depends on which window it was seen in.
#[derive(Debug, Clone)]
pub struct StubProvider {
    name: String,
    dim: usize,
    vocab_size: usize,
    context: f32,
    table: Vec<f32>,
}

impl StubProvider {
    pub fn new(dim: usize, vocab_size: u32, seed: u64) -> Result<Self> {
        if dim == 0 || vocab_size == 0 {
            return Err(Error::contract(
                "stub provider needs dim > 0 and vocab_size > 0",
            ));
        }
        let vocab_size = vocab_size as usize;
        let scale = 1.0 / (dim as f64).sqrt();
        let mut table = vec![0f32; vocab_size * dim];
        table.par_chunks_mut(dim).enumerate().for_each(|(t, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(t as u64)));
            for v in row {
                let x: f64 = StandardNormal.sample(&mut rng);
                *v = (x * scale) as f32;
            }
        });
        Ok(Self {
            name: "stub".into(),
            dim,
            vocab_size,
            context: 0.25,
            table,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_context(mut self, context: f32) -> Self {
        self.context = context;
        self
    }

    pub fn token_vector(&self, token: u32) -> &[f32] {
        let t = token as usize % self.vocab_size;
        &self.table[t * self.dim..(t + 1) * self.dim]
    }
}

impl EmbeddingProvider for StubProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, doc: &TokenizedDocument, windows: &[Window]) -> Result<Vec<WindowEmbeddings>> {
        let tokens = doc.tokens();
        windows
            .iter()
            .map(|w| {
                if w.end > tokens.len() || w.start >= w.end {
                    return Err(Error::Provider {
                        doc_id: doc.doc_id().to_string(),
                        message: format!("window {}..{} outside document", w.start, w.end),
                    });
                }
                let mut data = Vec::with_capacity(w.len() * self.dim);
                let mut ctx = vec![0f32; self.dim];
                for p in w.start..w.end {
                    let lo = p.saturating_sub(2).max(w.start);
                    let hi = (p + 3).min(w.end);
                    ctx.iter_mut().for_each(|c| *c = 0.0);
                    for &t in &tokens[lo..hi] {
                        for (c, v) in ctx.iter_mut().zip(self.token_vector(t)) {
                            *c += v;
                        }
                    }
                    let k = self.context / (hi - lo) as f32;
                    data.extend(
                        self.token_vector(tokens[p])
                            .iter()
                            .zip(&ctx)
                            .map(|(v, c)| v + k * c),
                    );
                }
                WindowEmbeddings::new(w.clone(), self.dim, data)
            })
            .collect()
    }
}

/// Wraps a provider and adds a fixed latency per document.
#[derive(Debug, Clone)]
pub struct DelayedProvider<P> {
    inner: P,
    per_document: Duration,
}

impl<P> DelayedProvider<P> {
    pub fn new(inner: P, per_document: Duration) -> Self {
        Self {
            inner,
            per_document,
        }
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for DelayedProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, doc: &TokenizedDocument, windows: &[Window]) -> Result<Vec<WindowEmbeddings>> {
        thread::sleep(self.per_document);
        self.inner.embed(doc, windows)
    }
}

/// Serves embeddings recorded by the exporter in `DFE1` files.
#[derive(Debug, Clone)]
pub struct InterchangeProvider {
    name: String,
    dim: usize,
    records: HashMap<String, InterchangeRecord>,
}

impl InterchangeProvider {
    pub fn from_records(name: impl Into<String>, records: Vec<InterchangeRecord>) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.dim)
            .ok_or_else(|| Error::Format("no interchange records".into()))?;
        let mut map = HashMap::with_capacity(records.len());
        for r in records {
            if r.dim != dim {
                return Err(Error::Format(format!(
                    "{:?} has dimension {}, expected {dim}",
                    r.doc_id, r.dim
                )));
            }
            let id = r.doc_id.clone();
            if map.insert(id.clone(), r).is_some() {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            records: map,
        })
    }

    /// Loads every `*.dfe` file of a directory.
    pub fn load_dir(name: impl Into<String>, dir: &Path) -> Result<Self> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "dfe"))
            .collect();
        files.sort();
        let mut records = Vec::new();
        for f in files {
            records.extend(read_record_file(&f)?);
        }
        Self::from_records(name, records)
    }

    pub fn record(&self, doc_id: &str) -> Option<&InterchangeRecord> {
        self.records.get(doc_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl EmbeddingProvider for InterchangeProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, doc: &TokenizedDocument, windows: &[Window]) -> Result<Vec<WindowEmbeddings>> {
        let fail = |message: String| Error::Provider {
            doc_id: doc.doc_id().to_string(),
            message,
        };
        let record = self
            .records
            .get(doc.doc_id())
            .ok_or_else(|| fail("no interchange record".into()))?;
        if record.alignment != doc.alignment() {
            return Err(fail(format!(
                "recorded alignment ({} tokens) differs from the tokenized document ({} tokens)",
                record.len(),
                doc.len()
            )));
        }
        let recorded: Vec<(usize, usize)> = record
            .windows
            .iter()
            .map(|w| (w.window().start, w.window().end))
            .collect();
        let requested: Vec<(usize, usize)> = windows.iter().map(|w| (w.start, w.end)).collect();
        if recorded != requested {
            return Err(fail(format!(
                "recorded windows {recorded:?} differ from requested {requested:?}"
            )));
        }
        Ok(record.windows.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunker::SlotSpec;

    fn clean(text: &str) -> CleanDocument {
        CleanDocument::new("d", text).unwrap()
    }

    #[test]
    fn stub_tokenizer_splits_long_words_and_aligns() {
        let tok = StubTokenizer::default();
        let doc = tok.tokenize(&clean("recurso ordinario a"));
        // "recurso" -> 2 pieces, "ordinario" -> 2 pieces, "a" -> 1
        assert_eq!(doc.alignment(), &[0, 0, 1, 1, 2]);
        assert!(doc
            .tokens()
            .iter()
            .all(|t| (RESERVED_IDS..30_000).contains(t)));
        assert_eq!(tok.tokenize(&clean("recurso ordinario a")), doc);
    }

    #[test]
    fn stub_provider_is_deterministic_and_context_sensitive() {
        let tok = StubTokenizer::default();
        let words = (0..40)
            .map(|i| format!("w{}", i % 9))
            .collect::<Vec<_>>()
            .join(" ");
        let doc = tok.tokenize(&clean(&words));
        let p = StubProvider::new(8, 30_000, 3).unwrap();
        let spec = SlotSpec::new(16, 6).unwrap();
        let a = embed_document(&p, &doc, spec).unwrap();
        let b = embed_document(&p, &doc, spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), doc.len());

        let w1 = Window {
            source_id: "d".into(),
            start: 0,
            end: 16,
            kind: crate::chunker::WindowKind::Initial,
        };
        let w2 = Window {
            source_id: "d".into(),
            start: 10,
            end: 26,
            kind: crate::chunker::WindowKind::Intermediate,
        };
        let e = p.embed(&doc, &[w1, w2]).unwrap();
        // Position 15 is at the edge of window 1 but interior to window 2.
        assert_ne!(e[0].row_at(15), e[1].row_at(15));
        assert_eq!(e[0].row_at(12), e[1].row_at(12));
    }

    #[test]
    fn interchange_provider_checks_windows_and_alignment() {
        let tok = StubTokenizer::default();
        let doc = tok.tokenize(&clean(&"palavra ".repeat(30)));
        let stub = StubProvider::new(4, 1000, 1).unwrap();
        let spec = SlotSpec::new(16, 4).unwrap();
        let windows = inference_windows(&doc, spec).unwrap();
        let record = InterchangeRecord {
            doc_id: "d".into(),
            dim: 4,
            alignment: doc.alignment().to_vec(),
            windows: stub.embed(&doc, &windows).unwrap(),
        };
        let provider = InterchangeProvider::from_records("fixture", vec![record]).unwrap();
        assert_eq!(
            embed_document(&provider, &doc, spec).unwrap(),
            embed_document(&stub, &doc, spec).unwrap()
        );
        let other = SlotSpec::new(16, 8).unwrap();
        assert!(matches!(
            embed_document(&provider, &doc, other),
            Err(Error::Provider { .. })
        ));
        let missing = TokenizedDocument::new("nope", vec![5], vec![0]).unwrap();
        match embed_document(&provider, &missing, spec) {
            Err(Error::Provider { doc_id, .. }) => assert_eq!(doc_id, "nope"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
