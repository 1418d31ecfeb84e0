use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_mlm_mask, slot_fixed, slot_overlap, window_seed, MaskPolicy, MaskVocab, SlotSpec,
    TokenizedDocument, Window, SPECIAL_ALIGNMENT,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotMode {
    /// Disjoint `N`-token windows, short tail dropped.
    Fixed,
    /// `N`-token windows with `K` return tokens.
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Masked language modelling: positions are selected and rewritten.
    Mlm,
    /// Causal language modelling: windows are emitted unchanged.
    Clm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPrep {
    pub mode: SlotMode,
    pub spec: SlotSpec,
    pub batch_size: usize,
    /// Token inserted between concatenated documents, if any.
    pub separator: Option<u32>,
    pub objective: Objective,
    pub mask: MaskPolicy,
    pub vocab: MaskVocab,
}

impl Default for TrainingPrep {
    fn default() -> Self {
        Self {
            mode: SlotMode::Overlap,
            spec: SlotSpec::TRAINING,
            batch_size: 1000,
            separator: None,
            objective: Objective::Mlm,
            mask: MaskPolicy::default(),
            vocab: MaskVocab {
                mask_token: 4,
                vocab_size: 30_000,
            },
        }
    }
}

/// Concatenated tokens of up to `batch_size` consecutive documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    pub id: String,
    pub tokens: Vec<u32>,
    /// False for separators and for special tokens of the source documents.
    pub maskable: Vec<bool>,
}

pub fn concat_batches(
    docs: &[TokenizedDocument],
    batch_size: usize,
    separator: Option<u32>,
) -> Result<Vec<TokenBatch>> {
    if batch_size == 0 {
        return Err(Error::contract("batch_size must be >= 1"));
    }
    Ok(docs
        .chunks(batch_size)
        .enumerate()
        .map(|(i, chunk)| {
            let mut tokens = Vec::new();
            let mut maskable = Vec::new();
            for (j, doc) in chunk.iter().enumerate() {
                if j > 0 {
                    if let Some(sep) = separator {
                        tokens.push(sep);
                        maskable.push(false);
                    }
                }
                tokens.extend_from_slice(doc.tokens());
                maskable.extend(doc.alignment().iter().map(|&a| a != SPECIAL_ALIGNMENT));
            }
            TokenBatch {
                id: format!("batch-{i:06}"),
                tokens,
                maskable,
            }
        })
        .collect())
}

/// One line of the training-sample JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub batch_id: String,
    pub start: usize,
    pub tokens: Vec<u32>,
    pub mlm_labels: Vec<(usize, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSamples {
    pub samples: Vec<TrainingSample>,
    pub batches: usize,
    /// Tokens not covered by any window (fixed-slot tails, short batches).
    pub dropped_tokens: usize,
}

/// Batches documents in order, slots every batch and masks each window.
pub fn prepare_training_samples(
    docs: &[TokenizedDocument],
    prep: &TrainingPrep,
) -> Result<TrainingSamples> {
    if prep.objective == Objective::Mlm {
        prep.mask.validate()?;
    }
    let batches = concat_batches(docs, prep.batch_size, prep.separator)?;
    let per_batch: Vec<(Vec<TrainingSample>, usize)> = batches
        .par_iter()
        .map(|batch| {
            let slots = match prep.mode {
                SlotMode::Fixed => {
                    slot_fixed(&batch.id, batch.tokens.len(), prep.spec.window_len())?
                }
                SlotMode::Overlap => slot_overlap(&batch.id, batch.tokens.len(), prep.spec),
            };
            let samples = slots
                .windows
                .iter()
                .map(|w| sample_for_window(batch, w, prep))
                .collect::<Result<Vec<_>>>()?;
            Ok((samples, slots.dropped))
        })
        .collect::<Result<_>>()?;

    let mut samples = Vec::new();
    let mut dropped_tokens = 0;
    for (s, dropped) in per_batch {
        samples.extend(s);
        dropped_tokens += dropped;
    }
    Ok(TrainingSamples {
        samples,
        batches: batches.len(),
        dropped_tokens,
    })
}

fn sample_for_window(
    batch: &TokenBatch,
    w: &Window,
    prep: &TrainingPrep,
) -> Result<TrainingSample> {
    let tokens = &batch.tokens[w.start..w.end];
    let (tokens, mlm_labels) = match prep.objective {
        Objective::Clm => (tokens.to_vec(), Vec::new()),
        Objective::Mlm => {
            let seed = window_seed(prep.mask.seed, &batch.id, w.start);
            let masked = apply_mlm_mask(
                tokens,
                &batch.maskable[w.start..w.end],
                &prep.mask,
                prep.vocab,
                seed,
            )?;
            (masked.tokens, masked.labels)
        }
    };
    Ok(TrainingSample {
        batch_id: batch.id.clone(),
        start: w.start,
        tokens,
        mlm_labels,
    })
}

pub fn write_training_jsonl<W: Write>(
    mut out: W,
    samples: &[TrainingSample],
) -> std::io::Result<()> {
    for sample in samples {
        serde_json::to_writer(&mut out, sample)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
