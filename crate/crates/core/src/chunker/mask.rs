use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{fnv1a, mix64};

/// How a selected position is rewritten. Proportions sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Substitution {
    pub mask: f64,
    pub random: f64,
    pub keep: f64,
}

impl Default for Substitution {
    fn default() -> Self {
        Self {
            mask: 0.8,
            random: 0.1,
            keep: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskPolicy {
    /// Fraction of maskable positions to select.
    pub rate: f64,
    pub substitution: Substitution,
    pub seed: u64,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        Self {
            rate: 0.15,
            substitution: Substitution::default(),
            seed: 0,
        }
    }
}

impl MaskPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(Error::contract(format!(
                "masking rate {} must lie in [0, 1]",
                self.rate
            )));
        }
        let Substitution { mask, random, keep } = self.substitution;
        if [mask, random, keep].iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::contract("substitution proportions must be >= 0"));
        }
        let sum = mask + random + keep;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!(
                "substitution proportions sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Number of positions selected out of `maskable`.
    pub fn selection_count(&self, maskable: usize) -> usize {
        (self.rate * maskable as f64).round() as usize
    }
}

/// Token ids needed to rewrite selected positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskVocab {
    pub mask_token: u32,
    /// Random replacements are drawn uniformly from `0..vocab_size`.
    pub vocab_size: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedWindow {
    pub tokens: Vec<u32>,
    /// `(position, original id)` for every selected position, by position.
    pub labels: Vec<(usize, u32)>,
}

/// Seed for one window, derived from the policy seed and the window's identity
/// so masks do not depend on processing order.
pub fn window_seed(policy_seed: u64, source_id: &str, start: usize) -> u64 {
    mix64(policy_seed ^ mix64(fnv1a(source_id.as_bytes()) ^ mix64(start as u64)))
}

/// Selects exactly `round(rate * |maskable|)` maskable positions uniformly
/// without replacement and rewrites each as mask / random / unchanged.
pub fn apply_mlm_mask(
    tokens: &[u32],
    maskable: &[bool],
    policy: &MaskPolicy,
    vocab: MaskVocab,
    seed: u64,
) -> Result<MaskedWindow> {
    policy.validate()?;
    if maskable.len() != tokens.len() {
        return Err(Error::contract(format!(
            "maskable flags ({}) must match window length ({})",
            maskable.len(),
            tokens.len()
        )));
    }
    if vocab.vocab_size == 0 {
        return Err(Error::contract("vocab_size must be > 0"));
    }
    let candidates: Vec<usize> = maskable
        .iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect();
    let count = policy.selection_count(candidates.len());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected: Vec<usize> = index::sample(&mut rng, candidates.len(), count)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    selected.sort_unstable();

    let mut out = tokens.to_vec();
    let Substitution { mask, random, .. } = policy.substitution;
    let labels = selected
        .into_iter()
        .map(|pos| {
            let u: f64 = rng.random();
            if u < mask {
                out[pos] = vocab.mask_token;
            } else if u < mask + random {
                out[pos] = rng.random_range(0..vocab.vocab_size);
            }
            (pos, tokens[pos])
        })
        .collect();
    Ok(MaskedWindow {
        tokens: out,
        labels,
    })
}
