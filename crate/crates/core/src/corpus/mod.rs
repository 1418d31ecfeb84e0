//! Document ingestion, cleaning and word tokenization.

mod clean;
mod tokenize;

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean_corpus, clean_text, CleanOutcome, CleaningPolicy, CleaningStep, Exclusion};
pub use tokenize::word_tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
}

/// A cleaned document. `words` is always `word_tokenize(&text)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanDocument {
    id: String,
    text: String,
    words: Vec<String>,
}

impl CleanDocument {
    /// Wraps already-cleaned text, deriving the word list.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.is_empty() {
            return Err(Error::EmptyDocument(id));
        }
        let words = word_tokenize(&text);
        Ok(Self { id, text, words })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One `{"id": ..., "text": ...}` object per line.
    Jsonl,
    /// A directory of `.txt` files; the file stem is the document id.
    Directory,
}

/// Ordered collection of raw documents with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStore {
    docs: Vec<RawDocument>,
}

impl CorpusStore {
    pub fn from_documents(docs: Vec<RawDocument>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if doc.id.is_empty() {
                return Err(Error::contract("document id must be non-empty"));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self { docs })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[RawDocument] {
        &self.docs
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RawDocument> {
        self.docs.iter()
    }
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: Option<String>,
    text: Option<String>,
}

/// Reads a corpus, preserving record order (JSONL) or file-name order (directory).
pub fn ingest_corpus(path: &Path, format: CorpusFormat) -> Result<CorpusStore> {
    match format {
        CorpusFormat::Jsonl => ingest_jsonl(path),
        CorpusFormat::Directory => ingest_directory(path),
    }
}

fn ingest_jsonl(path: &Path) -> Result<CorpusStore> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        let id = record.id.ok_or_else(|| Error::Schema {
            line: line_no,
            message: "record is missing field \"id\"".into(),
        })?;
        let text = record.text.ok_or_else(|| Error::Schema {
            line: line_no,
            message: "record is missing field \"text\"".into(),
        })?;
        if id.is_empty() {
            return Err(Error::Schema {
                line: line_no,
                message: "field \"id\" is empty".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        docs.push(RawDocument { id, text });
    }
    Ok(CorpusStore { docs })
}

fn ingest_directory(path: &Path) -> Result<CorpusStore> {
    let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        if p.is_file() && p.extension().is_some_and(|ext| ext == "txt") {
            files.push(p);
        }
    }
    files.sort();
    let mut docs = Vec::with_capacity(files.len());
    for file in files {
        let id = file
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::contract(format!("non UTF-8 file name {}", file.display())))?
            .to_string();
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        docs.push(RawDocument { id, text });
    }
    CorpusStore::from_documents(docs)
}

/// Writes documents as JSONL with the same `{"id", "text"}` schema as the input.
pub fn write_clean_jsonl<W: Write>(mut out: W, docs: &[CleanDocument]) -> std::io::Result<()> {
    for doc in docs {
        let record = RawDocument {
            id: doc.id.clone(),
            text: doc.text.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a cleaned corpus back. Texts are taken as already cleaned.
pub fn read_clean_jsonl(path: &Path) -> Result<Vec<CleanDocument>> {
    ingest_jsonl(path)?
        .docs
        .into_iter()
        .map(|d| CleanDocument::new(d.id, d.text))
        .collect()
}
