use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chunker::{SlotSpec, TokenizedDocument};
use crate::error::{Error, Result};
use crate::provider::{embed_document, EmbeddingProvider};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub provider_name: String,
    pub docs_processed: usize,
    pub elapsed_s: f64,
    pub docs_per_minute: f64,
}

/// Wall-clock rate at which `provider` turns documents into merged token
/// embeddings. Documents run one after another so the figure reflects the
/// provider, not the thread pool.
pub fn measure_throughput<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    docs: &[TokenizedDocument],
    spec: SlotSpec,
) -> Result<ThroughputReport> {
    if docs.is_empty() {
        return Err(Error::contract("throughput needs at least one document"));
    }
    let started = Instant::now();
    for doc in docs {
        embed_document(provider, doc, spec).map_err(|e| match e {
            e @ Error::Provider { .. } => e,
            other => Error::Provider {
                doc_id: doc.doc_id().to_string(),
                message: other.to_string(),
            },
        })?;
    }
    let elapsed_s = started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(ThroughputReport {
        provider_name: provider.name().to_string(),
        docs_processed: docs.len(),
        elapsed_s,
        docs_per_minute: docs.len() as f64 * 60.0 / elapsed_s,
    })
}

/// Detailed rows: `provider_name,docs_processed,elapsed_s,docs_per_minute`.
pub fn write_throughput_csv<W: Write>(out: W, reports: &[ThroughputReport]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in reports {
        writer
            .serialize(r)
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io("throughput csv", e))
}

/// The published table layout: model name and documents per minute to two
/// decimals.
pub fn write_throughput_table<W: Write>(out: W, reports: &[ThroughputReport]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(THROUGHPUT_TABLE_HEADER).map_err(map)?;
    for r in reports {
        writer
            .write_record([r.provider_name.clone(), format!("{:.2}", r.docs_per_minute)])
            .map_err(map)?;
    }
    writer.flush().map_err(|e| Error::io("throughput table", e))
}

pub const THROUGHPUT_TABLE_HEADER: [&str; 2] = ["Model", "Docs per minute"];
