//! Binary formats exchanged with the embedding exporter and between stages.
//!
//! # Token-embedding record (`DFE1`)
//!
//! All integers are unsigned 32-bit little-endian unless noted.
//!
//! ```text
//! magic        4 bytes  "DFE1"
//! id_len       u32      byte length of the UTF-8 document id
//! id           id_len bytes
//! L            u32      document token count
//! D            u32      embedding dimension
//! W            u32      window count
//! windows      W x (start u32, end u32)
//! alignment    L x i32  parent word per token, -1 for special tokens
//! matrices     W row-major (end - start) x D f32 matrices, in window order
//! ```
//!
//! A file may hold several records back to back.
//!
//! # Document-vector store
//!
//! ```text
//! count        u64
//! D            u32
//! per document id_len u32, id bytes, D x f32
//! ```
//!
//! with a companion CSV index `doc_id,row`.

use std::fs;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::chunker::{validate_alignment, Window, WindowKind};
use crate::error::{Error, Result};
use crate::vectorizer::{merge_plan, DocVector, WindowEmbeddings};

pub const RECORD_MAGIC: &[u8; 4] = b"DFE1";

/// Token embeddings of one document as written by the exporter.
#[derive(Debug, Clone, PartialEq)]
pub struct InterchangeRecord {
    pub doc_id: String,
    pub dim: usize,
    pub alignment: Vec<i32>,
    pub windows: Vec<WindowEmbeddings>,
}

impl InterchangeRecord {
    pub fn len(&self) -> usize {
        self.alignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alignment.is_empty()
    }

    /// Structural checks: window rows and dimension, ordering and coverage,
    /// alignment shape.
    pub fn validate(&self) -> Result<()> {
        if self.doc_id.is_empty() {
            return Err(Error::Format("empty document id".into()));
        }
        if self.windows.is_empty() {
            return Err(Error::Format(format!("{:?}: no windows", self.doc_id)));
        }
        for w in &self.windows {
            if w.dim() != self.dim {
                return Err(Error::Format(format!(
                    "{:?}: window dimension {} differs from header {}",
                    self.doc_id,
                    w.dim(),
                    self.dim
                )));
            }
        }
        validate_alignment(&self.doc_id, &self.alignment)?;
        let spans: Vec<Window> = self.windows.iter().map(|w| w.window().clone()).collect();
        merge_plan(&spans, self.len())?;
        Ok(())
    }
}

fn usize_to_u32(v: usize, what: &str) -> io::Result<u32> {
    u32::try_from(v).map_err(|_| {
        io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("{what} {v} exceeds u32"),
        )
    })
}

pub fn write_record<W: Write>(out: &mut W, record: &InterchangeRecord) -> io::Result<()> {
    out.write_all(RECORD_MAGIC)?;
    let id = record.doc_id.as_bytes();
    out.write_u32::<LittleEndian>(usize_to_u32(id.len(), "id length")?)?;
    out.write_all(id)?;
    out.write_u32::<LittleEndian>(usize_to_u32(record.len(), "token count")?)?;
    out.write_u32::<LittleEndian>(usize_to_u32(record.dim, "dimension")?)?;
    out.write_u32::<LittleEndian>(usize_to_u32(record.windows.len(), "window count")?)?;
    for w in &record.windows {
        out.write_u32::<LittleEndian>(usize_to_u32(w.window().start, "window start")?)?;
        out.write_u32::<LittleEndian>(usize_to_u32(w.window().end, "window end")?)?;
    }
    for &a in &record.alignment {
        out.write_i32::<LittleEndian>(a)?;
    }
    for w in &record.windows {
        for &v in w.data() {
            out.write_f32::<LittleEndian>(v)?;
        }
    }
    Ok(())
}

fn format_err(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Format("truncated record".into())
    } else {
        Error::Format(e.to_string())
    }
}

/// Reads the next record; `Ok(None)` at a clean end of input.
pub fn read_record<R: Read>(input: &mut R) -> Result<Option<InterchangeRecord>> {
    let mut magic = [0u8; 4];
    let mut filled = 0;
    while filled < 4 {
        match input.read(&mut magic[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(Error::Format("truncated magic".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(format_err(e)),
        }
    }
    if &magic != RECORD_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected \"DFE1\""
        )));
    }
    let id_len = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
    let mut id = vec![0u8; id_len];
    input.read_exact(&mut id).map_err(format_err)?;
    let doc_id =
        String::from_utf8(id).map_err(|_| Error::Format("document id is not UTF-8".into()))?;
    let len = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
    let dim = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
    let count = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
    if dim == 0 {
        return Err(Error::Format(format!("{doc_id:?}: dimension is zero")));
    }

    let mut spans = Vec::with_capacity(count);
    for i in 0..count {
        let start = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
        let end = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
        if start >= end || end > len {
            return Err(Error::Format(format!(
                "{doc_id:?}: window {i} spans {start}..{end} outside 0..{len}"
            )));
        }
        spans.push((start, end));
    }
    let mut alignment = vec![0i32; len];
    input
        .read_i32_into::<LittleEndian>(&mut alignment)
        .map_err(format_err)?;

    let mut windows = Vec::with_capacity(count);
    for (i, &(start, end)) in spans.iter().enumerate() {
        let mut data = vec![0f32; (end - start) * dim];
        input
            .read_f32_into::<LittleEndian>(&mut data)
            .map_err(format_err)?;
        let kind = match (i, count) {
            (_, 1) if start == 0 && end == len => WindowKind::Whole,
            (0, _) => WindowKind::Initial,
            (i, c) if i + 1 == c => WindowKind::Final,
            _ => WindowKind::Intermediate,
        };
        let window = Window {
            source_id: doc_id.clone(),
            start,
            end,
            kind,
        };
        windows.push(WindowEmbeddings::new(window, dim, data)?);
    }
    let record = InterchangeRecord {
        doc_id,
        dim,
        alignment,
        windows,
    };
    record.validate()?;
    Ok(Some(record))
}

/// Reads and validates every record in a file.
pub fn read_record_file(path: &Path) -> Result<Vec<InterchangeRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    while let Some(record) = read_record(&mut reader)? {
        records.push(record);
    }
    Ok(records)
}

pub fn write_record_file(path: &Path, records: &[InterchangeRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        write_record(&mut out, r).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_doc_vectors<W: Write>(out: &mut W, docs: &[DocVector]) -> Result<()> {
    let dim = docs.first().map_or(0, |d| d.vector.len());
    if let Some(bad) = docs.iter().find(|d| d.vector.len() != dim) {
        return Err(Error::contract(format!(
            "document {:?} has dimension {}, expected {dim}",
            bad.doc_id,
            bad.vector.len()
        )));
    }
    let io = |e| Error::io("document vector store", e);
    out.write_u64::<LittleEndian>(docs.len() as u64)
        .map_err(io)?;
    out.write_u32::<LittleEndian>(usize_to_u32(dim, "dimension").map_err(io)?)
        .map_err(io)?;
    for d in docs {
        let id = d.doc_id.as_bytes();
        out.write_u32::<LittleEndian>(usize_to_u32(id.len(), "id length").map_err(io)?)
            .map_err(io)?;
        out.write_all(id).map_err(io)?;
        for &v in &d.vector {
            out.write_f32::<LittleEndian>(v as f32).map_err(io)?;
        }
    }
    Ok(())
}

/// Reads a document-vector store; norms are recomputed from the stored values.
pub fn read_doc_vectors<R: Read>(input: &mut R) -> Result<Vec<DocVector>> {
    let count = input.read_u64::<LittleEndian>().map_err(format_err)?;
    let dim = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
    let mut docs = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut buf = vec![0f32; dim];
    for _ in 0..count {
        let id_len = input.read_u32::<LittleEndian>().map_err(format_err)? as usize;
        let mut id = vec![0u8; id_len];
        input.read_exact(&mut id).map_err(format_err)?;
        let id =
            String::from_utf8(id).map_err(|_| Error::Format("document id is not UTF-8".into()))?;
        input
            .read_f32_into::<LittleEndian>(&mut buf)
            .map_err(format_err)?;
        docs.push(DocVector::new(
            id,
            buf.iter().map(|&v| f64::from(v)).collect(),
        )?);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest).map_err(format_err)? != 0 {
        return Err(Error::Format(
            "trailing bytes after document vectors".into(),
        ));
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRow {
    pub doc_id: String,
    pub row: usize,
}

/// CSV index `doc_id,row` for a document-vector store.
pub fn write_doc_index<W: Write>(out: W, docs: &[DocVector]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (row, d) in docs.iter().enumerate() {
        writer
            .serialize(IndexRow {
                doc_id: d.doc_id.clone(),
                row,
            })
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io("document index", e))
}
