use std::ops::Range;

use crate::chunker::{validate_alignment, Window};
use crate::error::{Error, Result};

/// Row-major `len x dim` embedding matrix of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEmbeddings {
    window: Window,
    dim: usize,
    data: Vec<f32>,
}

impl WindowEmbeddings {
    pub fn new(window: Window, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("embedding dimension must be > 0"));
        }
        if data.len() != window.len() * dim {
            return Err(Error::contract(format!(
                "window {}..{} of {:?} has {} values, expected {} rows x {dim}",
                window.start,
                window.end,
                window.source_id,
                data.len(),
                window.len()
            )));
        }
        Ok(Self { window, dim, data })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Row for the document position `pos`, which must lie inside the window.
    pub fn row_at(&self, pos: usize) -> &[f32] {
        let r = pos - self.window.start;
        &self.data[r * self.dim..(r + 1) * self.dim]
    }
}

/// One embedding row per document token position.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSeq {
    doc_id: String,
    dim: usize,
    data: Vec<f32>,
    alignment: Vec<i32>,
}

impl TokenEmbeddingSeq {
    pub fn new(
        doc_id: impl Into<String>,
        dim: usize,
        data: Vec<f32>,
        alignment: Vec<i32>,
    ) -> Result<Self> {
        let doc_id = doc_id.into();
        if dim == 0 || data.len() != alignment.len() * dim {
            return Err(Error::contract(format!(
                "document {doc_id:?}: {} values do not form {} rows of dimension {dim}",
                data.len(),
                alignment.len()
            )));
        }
        validate_alignment(&doc_id, &alignment)?;
        Ok(Self {
            doc_id,
            dim,
            data,
            alignment,
        })
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.alignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alignment.is_empty()
    }

    pub fn alignment(&self) -> &[i32] {
        &self.alignment
    }

    pub fn row(&self, pos: usize) -> &[f32] {
        &self.data[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// Positions each window supplies, as one range per window.
///
/// The overlap between consecutive windows `[s, e)` is split at
/// `s + ceil((e - s) / 2)`: the earlier half stays with the previous window and
/// the later half goes to the current one, so odd overlaps give the extra
/// position to the previous window. A standard 64-token return overlap splits
/// 32/32; a longer overlap with the final window splits in half the same way.
///
/// The ranges partition `[0, len)` and each lies inside its window.
pub fn merge_plan(windows: &[Window], len: usize) -> Result<Vec<Range<usize>>> {
    let first = windows
        .first()
        .ok_or_else(|| Error::contract("cannot merge zero windows"))?;
    if len == 0 {
        return Err(Error::contract("cannot merge a zero-length document"));
    }
    if first.start > 0 {
        return Err(Error::CoverageGap {
            start: 0,
            end: first.start.min(len),
        });
    }
    for w in windows {
        if w.start >= w.end || w.end > len {
            return Err(Error::contract(format!(
                "window {}..{} is empty or exceeds document length {len}",
                w.start, w.end
            )));
        }
    }

    let mut boundaries = Vec::with_capacity(windows.len() + 1);
    boundaries.push(0);
    for pair in windows.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if cur.start <= prev.start || cur.end <= prev.end {
            return Err(Error::contract(format!(
                "windows {}..{} and {}..{} are not in strictly increasing order",
                prev.start, prev.end, cur.start, cur.end
            )));
        }
        if cur.start > prev.end {
            return Err(Error::CoverageGap {
                start: prev.end,
                end: cur.start,
            });
        }
        let overlap = prev.end - cur.start;
        boundaries.push(cur.start + overlap.div_ceil(2));
    }
    let last = windows.last().expect("non-empty");
    if last.end < len {
        return Err(Error::CoverageGap {
            start: last.end,
            end: len,
        });
    }
    boundaries.push(len);
    Ok(boundaries.windows(2).map(|b| b[0]..b[1]).collect())
}

/// Reconciles window embeddings into a single `len x dim` sequence following
/// [`merge_plan`]. `alignment` gives the parent word of every position and
/// fixes the document length.
pub fn merge_window_embeddings(
    doc_id: &str,
    windows: &[WindowEmbeddings],
    alignment: Vec<i32>,
) -> Result<TokenEmbeddingSeq> {
    let len = alignment.len();
    let spans: Vec<Window> = windows.iter().map(|w| w.window.clone()).collect();
    let plan = merge_plan(&spans, len)?;
    let dim = windows[0].dim;
    if let Some(bad) = windows.iter().find(|w| w.dim != dim) {
        return Err(Error::contract(format!(
            "window {}..{} has dimension {}, expected {dim}",
            bad.window.start, bad.window.end, bad.dim
        )));
    }

    let mut data = Vec::with_capacity(len * dim);
    for (w, range) in windows.iter().zip(plan) {
        if range.is_empty() {
            continue;
        }
        let lo = (range.start - w.window.start) * dim;
        let hi = (range.end - w.window.start) * dim;
        data.extend_from_slice(&w.data[lo..hi]);
    }
    TokenEmbeddingSeq::new(doc_id, dim, data, alignment)
}
