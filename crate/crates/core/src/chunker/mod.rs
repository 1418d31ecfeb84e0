//! Token windows for corpus preparation and for inference.
//!
//! Two slotting rules are provided. [`slot_fixed`] cuts a sequence into
//! disjoint windows of `N` tokens and drops the short tail. [`slot_overlap`]
//! starts each intermediate window `K` tokens ("return tokens") before the end
//! of the previous one, and always closes with a window ending exactly at the
//! last token, so no token is lost and edge tokens get context on both sides.

mod mask;
mod training;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mask::{apply_mlm_mask, window_seed, MaskPolicy, MaskVocab, MaskedWindow, Substitution};
pub use training::{
    concat_batches, prepare_training_samples, write_training_jsonl, Objective, SlotMode,
    TokenBatch, TrainingPrep, TrainingSample, TrainingSamples,
};

/// Alignment value for special tokens that belong to no word.
pub const SPECIAL_ALIGNMENT: i32 = -1;

/// Subword token ids of one document with their parent-word indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDocument {
    #[serde(rename = "id")]
    doc_id: String,
    tokens: Vec<u32>,
    alignment: Vec<i32>,
}

impl TokenizedDocument {
    pub fn new(doc_id: impl Into<String>, tokens: Vec<u32>, alignment: Vec<i32>) -> Result<Self> {
        let doc = Self {
            doc_id: doc_id.into(),
            tokens,
            alignment,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.alignment.len() {
            return Err(Error::contract(format!(
                "document {:?}: {} tokens but {} alignment entries",
                self.doc_id,
                self.tokens.len(),
                self.alignment.len()
            )));
        }
        validate_alignment(&self.doc_id, &self.alignment)
    }

    pub fn doc_id(&self) -> &str {
        &self.doc_id
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn alignment(&self) -> &[i32] {
        &self.alignment
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Checks that word indices are -1 or non-negative and never decrease across
/// non-special positions.
pub(crate) fn validate_alignment(doc_id: &str, alignment: &[i32]) -> Result<()> {
    let mut last = None;
    for (pos, &a) in alignment.iter().enumerate() {
        if a == SPECIAL_ALIGNMENT {
            continue;
        }
        if a < 0 {
            return Err(Error::contract(format!(
                "document {doc_id:?}: invalid alignment {a} at position {pos}"
            )));
        }
        if last.is_some_and(|prev| a < prev) {
            return Err(Error::contract(format!(
                "document {doc_id:?}: alignment decreases at position {pos}"
            )));
        }
        last = Some(a);
    }
    Ok(())
}

/// Window length `N` and return tokens `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    window_len: usize,
    return_tokens: usize,
}

impl SlotSpec {
    /// Corpus preparation default, Slot 128/32.
    pub const TRAINING: SlotSpec = SlotSpec {
        window_len: 128,
        return_tokens: 32,
    };
    /// Inference default: 510 content tokens leave room for the two special
    /// tokens of a 512-token encoder; 64 return tokens.
    pub const INFERENCE: SlotSpec = SlotSpec {
        window_len: 510,
        return_tokens: 64,
    };

    pub fn new(window_len: usize, return_tokens: usize) -> Result<Self> {
        if window_len < 2 {
            return Err(Error::contract(format!(
                "window length N = {window_len} must be >= 2"
            )));
        }
        if return_tokens >= window_len {
            return Err(Error::contract(format!(
                "return tokens K = {return_tokens} must be < N = {window_len}"
            )));
        }
        Ok(Self {
            window_len,
            return_tokens,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn return_tokens(&self) -> usize {
        self.return_tokens
    }

    pub fn stride(&self) -> usize {
        self.window_len - self.return_tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Initial,
    Intermediate,
    Final,
    /// A single window spanning the whole sequence.
    Whole,
}

impl WindowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            WindowKind::Initial => "initial",
            WindowKind::Intermediate => "intermediate",
            WindowKind::Final => "final",
            WindowKind::Whole => "whole",
        }
    }
}

/// Half-open token span `[start, end)` of a document or batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    #[serde(rename = "doc_id")]
    pub source_id: String,
    pub start: usize,
    pub end: usize,
    pub kind: WindowKind,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, pos: usize) -> bool {
        (self.start..self.end).contains(&pos)
    }
}

/// Windows from a slotting rule plus the number of tokens left uncovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slots {
    pub windows: Vec<Window>,
    pub dropped: usize,
}

/// Consecutive disjoint windows `[0,N), [N,2N), ...`; a tail shorter than `N`
/// is dropped and counted.
pub fn slot_fixed(source_id: &str, len: usize, window_len: usize) -> Result<Slots> {
    if window_len < 2 {
        return Err(Error::contract(format!(
            "window length N = {window_len} must be >= 2"
        )));
    }
    let count = len / window_len;
    let windows = (0..count)
        .map(|i| Window {
            source_id: source_id.to_string(),
            start: i * window_len,
            end: (i + 1) * window_len,
            kind: if count == 1 && len == window_len {
                WindowKind::Whole
            } else if i == 0 {
                WindowKind::Initial
            } else if i + 1 == count {
                WindowKind::Final
            } else {
                WindowKind::Intermediate
            },
        })
        .collect();
    Ok(Slots {
        windows,
        dropped: len - count * window_len,
    })
}

/// Overlapping windows: `[0,N)`, then starts advancing by `N-K` while the next
/// window fits, then `[L-N, L)` unless it repeats the last emitted window.
///
/// A sequence shorter than `N` yields no windows and reports all of its tokens
/// as dropped.
pub fn slot_overlap(source_id: &str, len: usize, spec: SlotSpec) -> Slots {
    let n = spec.window_len;
    if len < n {
        return Slots {
            windows: Vec::new(),
            dropped: len,
        };
    }
    if len == n {
        return Slots {
            windows: vec![Window {
                source_id: source_id.to_string(),
                start: 0,
                end: n,
                kind: WindowKind::Whole,
            }],
            dropped: 0,
        };
    }

    let mut starts = vec![0];
    let mut next = spec.stride();
    while next + n <= len {
        starts.push(next);
        next += spec.stride();
    }
    let final_start = len - n;
    if *starts.last().expect("starts begins with 0") != final_start {
        starts.push(final_start);
    }

    let last = starts.len() - 1;
    let windows = starts
        .into_iter()
        .enumerate()
        .map(|(i, start)| Window {
            source_id: source_id.to_string(),
            start,
            end: start + n,
            kind: match i {
                0 => WindowKind::Initial,
                i if i == last => WindowKind::Final,
                _ => WindowKind::Intermediate,
            },
        })
        .collect();
    Slots {
        windows,
        dropped: 0,
    }
}

/// Inference windows for one document. Unlike corpus preparation, a document
/// shorter than the slot keeps a single whole-document window.
///
/// Counts content tokens only; room for special tokens is the embedding
/// provider's concern.
pub fn inference_windows(doc: &TokenizedDocument, spec: SlotSpec) -> Result<Vec<Window>> {
    if doc.is_empty() {
        return Err(Error::EmptyDocument(doc.doc_id.clone()));
    }
    if doc.len() < spec.window_len {
        return Ok(vec![Window {
            source_id: doc.doc_id.clone(),
            start: 0,
            end: doc.len(),
            kind: WindowKind::Whole,
        }]);
    }
    Ok(slot_overlap(&doc.doc_id, doc.len(), spec).windows)
}

#[derive(Serialize, Deserialize)]
struct ManifestRow {
    doc_id: String,
    start: usize,
    end: usize,
    kind: WindowKind,
}

/// Writes the window manifest CSV `doc_id,start,end,kind`.
pub fn write_window_manifest<W: Write>(out: W, windows: &[Window]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for w in windows {
        writer
            .serialize(ManifestRow {
                doc_id: w.source_id.clone(),
                start: w.start,
                end: w.end,
                kind: w.kind,
            })
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io("window manifest", e))?;
    Ok(())
}

pub fn read_window_manifest<R: Read>(input: R) -> Result<Vec<Window>> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize::<ManifestRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Schema {
                line: i + 2,
                message: e.to_string(),
            })?;
            if row.end <= row.start {
                return Err(Error::Schema {
                    line: i + 2,
                    message: format!("empty window {}..{}", row.start, row.end),
                });
            }
            Ok(Window {
                source_id: row.doc_id,
                start: row.start,
                end: row.end,
                kind: row.kind,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spans(windows: &[Window]) -> Vec<(usize, usize)> {
        windows.iter().map(|w| (w.start, w.end)).collect()
    }

    fn doc(len: usize) -> TokenizedDocument {
        TokenizedDocument::new("d", vec![7; len], (0..len as i32).collect()).unwrap()
    }

    #[test]
    fn fixed_slots_drop_the_tail() {
        let slots = slot_fixed("b", 1000, 128).unwrap();
        assert_eq!(slots.windows.len(), 7);
        let starts: Vec<_> = slots.windows.iter().map(|w| w.start).collect();
        assert_eq!(starts, [0, 128, 256, 384, 512, 640, 768]);
        assert_eq!(slots.dropped, 104);

        let exact = slot_fixed("b", 128, 128).unwrap();
        assert_eq!(spans(&exact.windows), [(0, 128)]);
        assert_eq!(exact.dropped, 0);

        let short = slot_fixed("b", 127, 128).unwrap();
        assert!(short.windows.is_empty());
        assert_eq!(short.dropped, 127);
    }

    #[test]
    fn overlap_slots_hand_simulation() {
        let spec = SlotSpec::new(128, 32).unwrap();
        let slots = slot_overlap("b", 300, spec);
        assert_eq!(spans(&slots.windows), [(0, 128), (96, 224), (172, 300)]);
        let kinds: Vec<_> = slots.windows.iter().map(|w| w.kind).collect();
        assert_eq!(
            kinds,
            [
                WindowKind::Initial,
                WindowKind::Intermediate,
                WindowKind::Final
            ]
        );
    }

    #[test]
    fn exact_fit_is_one_window_for_any_k() {
        for k in [0, 1, 64, 127] {
            let slots = slot_overlap("b", 128, SlotSpec::new(128, k).unwrap());
            assert_eq!(spans(&slots.windows), [(0, 128)]);
        }
    }

    #[test]
    fn final_window_is_not_duplicated() {
        // K = 0 and L = 2N: the second window already ends at L.
        let slots = slot_overlap("b", 256, SlotSpec::new(128, 0).unwrap());
        assert_eq!(spans(&slots.windows), [(0, 128), (128, 256)]);
        assert_eq!(slots.windows[1].kind, WindowKind::Final);
    }

    #[test]
    fn return_tokens_must_be_below_window_len() {
        assert!(SlotSpec::new(128, 128).is_err());
        assert!(SlotSpec::new(1, 0).is_err());
    }

    #[test]
    fn short_sequence_reports_skipped_tokens() {
        let slots = slot_overlap("b", 100, SlotSpec::TRAINING);
        assert!(slots.windows.is_empty());
        assert_eq!(slots.dropped, 100);
    }

    #[test]
    fn inference_windows_reconstructed_example() {
        let windows = inference_windows(&doc(1100), SlotSpec::INFERENCE).unwrap();
        assert_eq!(spans(&windows), [(0, 510), (446, 956), (590, 1100)]);
    }

    #[test]
    fn inference_windows_short_and_exact_documents() {
        let exact = inference_windows(&doc(510), SlotSpec::INFERENCE).unwrap();
        assert_eq!(spans(&exact), [(0, 510)]);
        let short = inference_windows(&doc(400), SlotSpec::INFERENCE).unwrap();
        assert_eq!(spans(&short), [(0, 400)]);
        assert_eq!(short[0].kind, WindowKind::Whole);
    }

    #[test]
    fn empty_document_is_an_error_naming_it() {
        let empty = TokenizedDocument::new("vazio", vec![], vec![]).unwrap();
        match inference_windows(&empty, SlotSpec::INFERENCE) {
            Err(Error::EmptyDocument(id)) => assert_eq!(id, "vazio"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alignment_must_match_and_not_decrease() {
        assert!(TokenizedDocument::new("d", vec![1, 2], vec![0]).is_err());
        assert!(TokenizedDocument::new("d", vec![1, 2, 3], vec![1, 0, 2]).is_err());
        assert!(TokenizedDocument::new("d", vec![1, 2, 3, 4], vec![-1, 0, 0, -1]).is_ok());
        assert!(TokenizedDocument::new("d", vec![1], vec![-2]).is_err());
    }

    #[test]
    fn manifest_csv_round_trip() {
        let windows = inference_windows(&doc(1100), SlotSpec::INFERENCE).unwrap();
        let mut buf = Vec::new();
        write_window_manifest(&mut buf, &windows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("doc_id,start,end,kind\nd,0,510,initial\n"));
        assert_eq!(read_window_manifest(buf.as_slice()).unwrap(), windows);
    }

    proptest! {
        #[test]
        fn overlap_windows_cover_stride_and_close_at_end(
            (n, k, len) in (2usize..300).prop_flat_map(|n| (Just(n), 0..n, n..n * 6))
        ) {
            let spec = SlotSpec::new(n, k).unwrap();
            let windows = slot_overlap("b", len, spec).windows;
            prop_assert_eq!(windows[0].start, 0);
            prop_assert_eq!(windows.last().unwrap().end, len);
            prop_assert!(windows.iter().all(|w| w.len() == n));
            let non_final = &windows[..windows.len() - 1];
            for pair in non_final.windows(2) {
                prop_assert_eq!(pair[1].start - pair[0].start, n - k);
            }
            for pair in windows.windows(2) {
                prop_assert!(pair[1].start <= pair[0].end, "gap between windows");
                prop_assert!(pair[1].start > pair[0].start);
            }
        }
    }
}
