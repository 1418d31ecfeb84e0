//! The single TOML pipeline configuration.
//!
//! Every section is optional and every field has a default, except the corpus
//! path. Unknown keys are rejected so that typos fail loudly.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use docflow_core::chunker::{
    MaskPolicy, MaskVocab, Objective, SlotMode, SlotSpec, Substitution, TrainingPrep,
};
use docflow_core::clusterer::{default_candidates, KMeansConfig};
use docflow_core::corpus::{CleaningPolicy, CorpusFormat};
use docflow_core::evaluator::{ProjectionConfig, MIN_ITERATIONS};
use serde::{Deserialize, Serialize};

/// A problem with the command line or the configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub cleaning: CleaningPolicy,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub projection: ProjectionConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// JSONL file of `{"id", "text"}` records, or a directory of `.txt` files.
    pub corpus: PathBuf,
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    /// Used when neither `--workspace` nor `DOCFLOW_WORKSPACE` is given.
    #[serde(default = "default_workspace")]
    pub workspace: PathBuf,
}

fn default_format() -> CorpusFormat {
    CorpusFormat::Jsonl
}

fn default_workspace() -> PathBuf {
    PathBuf::from("workspace")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub mode: SlotMode,
    pub window_len: usize,
    pub return_tokens: usize,
    pub batch_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separator: Option<u32>,
    pub objective: Objective,
    pub mask_rate: f64,
    pub mask_seed: u64,
    pub substitution: Substitution,
    pub mask_token: u32,
    /// Also the vocabulary of the built-in stub tokenizer.
    pub vocab_size: u32,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let prep = TrainingPrep::default();
        Self {
            mode: prep.mode,
            window_len: prep.spec.window_len(),
            return_tokens: prep.spec.return_tokens(),
            batch_size: prep.batch_size,
            separator: prep.separator,
            objective: prep.objective,
            mask_rate: prep.mask.rate,
            mask_seed: prep.mask.seed,
            substitution: prep.mask.substitution,
            mask_token: prep.vocab.mask_token,
            vocab_size: prep.vocab.vocab_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub window_len: usize,
    pub return_tokens: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            window_len: SlotSpec::INFERENCE.window_len(),
            return_tokens: SlotSpec::INFERENCE.return_tokens(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    /// Deterministic pseudo-embeddings; needs no model.
    Stub,
    /// Token embeddings recorded by the exporter as `*.dfe` files.
    Interchange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Label used in reports.
    pub name: String,
    pub dim: usize,
    pub seed: u64,
    pub context: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings_dir: Option<PathBuf>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Stub,
            name: "stub".into(),
            dim: 64,
            seed: 11,
            context: 0.25,
            embeddings_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    /// Candidate cluster counts for the elbow; a single value fixes K.
    pub candidates: Vec<usize>,
    pub seed: u64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub normalize_inputs: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let k = KMeansConfig::default();
        Self {
            candidates: default_candidates(),
            seed: k.seed,
            max_iterations: k.max_iterations,
            tolerance: k.tolerance,
            restarts: k.restarts,
            normalize_inputs: k.normalize_inputs,
        }
    }
}

impl ClusteringConfig {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.candidates[0],
            seed: self.seed,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            normalize_inputs: self.normalize_inputs,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Documents timed, taken from the start of the cleaned corpus.
    pub docs: usize,
    /// Simulated provider latency per document.
    pub delay_ms: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            docs: 100,
            delay_ms: 0,
        }
    }
}

impl PipelineConfig {
    /// Parses and validates `path`. Relative paths inside the file are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.paths.corpus = base.join(&config.paths.corpus);
        config.paths.workspace = base.join(&config.paths.workspace);
        if let Some(dir) = &mut config.provider.embeddings_dir {
            *dir = base.join(&*dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.training.mask_seed = seed;
        self.clustering.seed = seed;
        self.projection.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let check = |section: &str, r: docflow_core::Result<()>| {
            r.map_err(|e| usage(format!("{section}: {e}")))
        };
        if !self.paths.corpus.exists() {
            return Err(usage(format!(
                "paths.corpus: {} does not exist",
                self.paths.corpus.display()
            )));
        }
        check("cleaning", self.cleaning.validate())?;
        self.training_prep()?;
        self.inference_spec()?;
        if self.training.vocab_size <= docflow_core::provider::RESERVED_IDS {
            return Err(usage(format!(
                "training.vocab_size = {} must exceed the {} reserved ids",
                self.training.vocab_size,
                docflow_core::provider::RESERVED_IDS
            )));
        }
        if self.training.batch_size == 0 {
            return Err(usage("training.batch_size must be >= 1"));
        }
        match self.provider.kind {
            ProviderKind::Stub if self.provider.dim == 0 => {
                return Err(usage("provider.dim must be >= 1"));
            }
            ProviderKind::Interchange => {
                match &self.provider.embeddings_dir {
                    None => return Err(usage(
                        "provider.embeddings_dir is required when provider.kind = \"interchange\"",
                    )),
                    Some(dir) if !dir.is_dir() => {
                        return Err(usage(format!(
                            "provider.embeddings_dir: {} is not a directory",
                            dir.display()
                        )))
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        let c = &self.clustering.candidates;
        if c.is_empty() || c.len() == 2 {
            return Err(usage(format!(
                "clustering.candidates has {} values; give one K or at least 3 candidates",
                c.len()
            )));
        }
        if c[0] == 0 || c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(usage(
                "clustering.candidates must be positive and strictly increasing",
            ));
        }
        check("clustering", self.clustering.kmeans().validate())?;
        let p = &self.projection;
        if !(p.perplexity >= 1.0) {
            return Err(usage(format!(
                "projection.perplexity = {} must be >= 1",
                p.perplexity
            )));
        }
        if p.iterations < MIN_ITERATIONS {
            return Err(usage(format!(
                "projection.iterations = {} must be >= {MIN_ITERATIONS}",
                p.iterations
            )));
        }
        if !(p.learning_rate > 0.0) {
            return Err(usage("projection.learning_rate must be > 0"));
        }
        if self.bench.docs == 0 {
            return Err(usage("bench.docs must be >= 1"));
        }
        Ok(())
    }

    pub fn training_prep(&self) -> Result<TrainingPrep> {
        let t = &self.training;
        let spec = SlotSpec::new(t.window_len, t.return_tokens)
            .map_err(|e| usage(format!("training (window_len N, return_tokens K): {e}")))?;
        let prep = TrainingPrep {
            mode: t.mode,
            spec,
            batch_size: t.batch_size,
            separator: t.separator,
            objective: t.objective,
            mask: MaskPolicy {
                rate: t.mask_rate,
                substitution: t.substitution,
                seed: t.mask_seed,
            },
            vocab: MaskVocab {
                mask_token: t.mask_token,
                vocab_size: t.vocab_size,
            },
        };
        prep.mask
            .validate()
            .map_err(|e| usage(format!("training: {e}")))?;
        Ok(prep)
    }

    pub fn inference_spec(&self) -> Result<SlotSpec> {
        SlotSpec::new(self.inference.window_len, self.inference.return_tokens)
            .map_err(|e| usage(format!("inference (window_len S, return_tokens K): {e}")))
    }

    /// The fully defaulted configuration as TOML.
    pub fn echo(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing config")
    }
}
