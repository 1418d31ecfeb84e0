//! Pipeline stages. Each reads fixed-name artifacts from the workspace and
//! writes its own; the manifest decides whether a stage can be skipped.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use docflow_core::chunker::{
    inference_windows, prepare_training_samples, write_training_jsonl, write_window_manifest,
    TokenizedDocument,
};
use docflow_core::clusterer::{kmeans_fit, select_k_elbow, ClusterModel};
use docflow_core::corpus::{
    clean_corpus, ingest_corpus, read_clean_jsonl, write_clean_jsonl, CleanDocument,
};
use docflow_core::evaluator::{
    centroid_similarity_stats, measure_throughput, project_tsne, write_projection_csv,
    write_report_csv, write_throughput_csv, write_throughput_table, MetricReport,
};
use docflow_core::interchange::{read_doc_vectors, write_doc_index, write_doc_vectors};
use docflow_core::provider::{
    vectorize_documents, DelayedProvider, EmbeddingProvider, InterchangeProvider, StubProvider,
    StubTokenizer,
};
use docflow_core::vectorizer::{fit_tfidf, DocVector};
use docflow_core::Matrix;
use serde::Serialize;
use serde_json::json;

use crate::config::{PipelineConfig, ProviderKind};
use crate::workspace::{hash_bytes, hash_path, StageRecord, StageStatus, Workspace};

pub const CLEAN_CORPUS: &str = "corpus.clean.jsonl";
pub const EXCLUSIONS: &str = "exclusions.json";
pub const TOKENS: &str = "tokens.jsonl";
pub const TRAINING_SAMPLES: &str = "training_samples.jsonl";
pub const WINDOWS: &str = "windows.csv";
pub const DOC_VECTORS: &str = "doc_vectors.bin";
pub const DOC_INDEX: &str = "doc_vectors.csv";
pub const CLUSTER_MODEL: &str = "cluster_model.json";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const ELBOW: &str = "elbow.csv";
pub const REPORT: &str = "report.json";
pub const REPORT_PAIRWISE: &str = "report_pairwise.csv";
pub const REPORT_CENTROID: &str = "report_centroid.csv";
pub const PROJECTION: &str = "projection.csv";
pub const THROUGHPUT: &str = "throughput.csv";
pub const THROUGHPUT_DETAIL: &str = "throughput_detail.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    PrepareTraining,
    EmbedMergePool,
    Cluster,
    Evaluate,
    Project,
    Bench,
}

impl Stage {
    /// The stages `docflow all` runs, in order. Benchmarking is separate.
    pub const PIPELINE: [Stage; 6] = [
        Stage::Ingest,
        Stage::PrepareTraining,
        Stage::EmbedMergePool,
        Stage::Cluster,
        Stage::Evaluate,
        Stage::Project,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::PrepareTraining => "prepare-training",
            Stage::EmbedMergePool => "embed-merge-pool",
            Stage::Cluster => "cluster",
            Stage::Evaluate => "evaluate",
            Stage::Project => "project",
            Stage::Bench => "bench",
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[CLEAN_CORPUS, EXCLUSIONS],
            Stage::PrepareTraining => &[TOKENS, TRAINING_SAMPLES],
            Stage::EmbedMergePool => &[WINDOWS, DOC_VECTORS, DOC_INDEX],
            Stage::Cluster => &[CLUSTER_MODEL, ASSIGNMENTS, ELBOW],
            Stage::Evaluate => &[REPORT, REPORT_PAIRWISE, REPORT_CENTROID],
            Stage::Project => &[PROJECTION],
            Stage::Bench => &[THROUGHPUT, THROUGHPUT_DETAIL],
        }
    }

    /// Inputs as `(manifest key, path)`. Fails, naming the file, when an
    /// upstream artifact is missing.
    fn inputs(self, config: &PipelineConfig, ws: &Workspace) -> Result<Vec<(String, PathBuf)>> {
        let artifact = |name: &str, producer: Stage| -> Result<(String, PathBuf)> {
            Ok((name.to_string(), ws.require(name, producer.name())?))
        };
        Ok(match self {
            Stage::Ingest => vec![(
                config.paths.corpus.display().to_string(),
                config.paths.corpus.clone(),
            )],
            Stage::PrepareTraining | Stage::Bench => vec![artifact(CLEAN_CORPUS, Stage::Ingest)?],
            Stage::EmbedMergePool => {
                let mut inputs = vec![artifact(CLEAN_CORPUS, Stage::Ingest)?];
                if let (ProviderKind::Interchange, Some(dir)) =
                    (config.provider.kind, &config.provider.embeddings_dir)
                {
                    inputs.push((dir.display().to_string(), dir.clone()));
                }
                inputs
            }
            Stage::Cluster => vec![artifact(DOC_VECTORS, Stage::EmbedMergePool)?],
            Stage::Evaluate | Stage::Project => vec![
                artifact(DOC_VECTORS, Stage::EmbedMergePool)?,
                artifact(CLUSTER_MODEL, Stage::Cluster)?,
            ],
        })
    }

    /// The configuration this stage's outputs depend on.
    fn config_view(self, config: &PipelineConfig) -> serde_json::Value {
        let c = config;
        let view = match self {
            Stage::Ingest => json!({ "format": c.paths.format, "cleaning": c.cleaning }),
            Stage::PrepareTraining => json!({ "training": c.training }),
            Stage::EmbedMergePool => json!({
                "inference": c.inference,
                "provider": c.provider,
                "vocab_size": c.training.vocab_size,
            }),
            Stage::Cluster => json!({ "clustering": c.clustering }),
            Stage::Evaluate => json!({ "provider_name": c.provider.name }),
            Stage::Project => json!({
                "projection": c.projection,
                "normalize_inputs": c.clustering.normalize_inputs,
            }),
            Stage::Bench => json!({
                "bench": c.bench,
                "inference": c.inference,
                "provider": c.provider,
                "vocab_size": c.training.vocab_size,
            }),
        };
        json!({ "version": env!("CARGO_PKG_VERSION"), "stage": self.name(), "config": view })
    }
}

/// Runs `stage` unless the manifest shows identical inputs and configuration
/// and the recorded outputs are untouched.
pub fn run_stage(stage: Stage, config: &PipelineConfig, ws: &Workspace) -> Result<StageStatus> {
    let started = Instant::now();
    let inputs: BTreeMap<String, String> = stage
        .inputs(config, ws)?
        .into_iter()
        .map(|(key, path)| Ok((key, hash_path(&path)?)))
        .collect::<Result<_>>()?;
    let config_hash = hash_bytes(&serde_json::to_vec(&stage.config_view(config))?);

    let mut manifest = ws.load_manifest()?;
    if let Some(previous) = manifest.stages.get(stage.name()) {
        if previous.config_hash == config_hash
            && previous.inputs == inputs
            && ws.outputs_intact(previous)
        {
            let record = StageRecord {
                status: StageStatus::Skipped,
                duration_s: started.elapsed().as_secs_f64(),
                ..previous.clone()
            };
            manifest.stages.insert(stage.name().to_string(), record);
            ws.save_manifest(&manifest)?;
            eprintln!(
                "{}: skipped (inputs and configuration unchanged)",
                stage.name()
            );
            return Ok(StageStatus::Skipped);
        }
    }

    execute(stage, config, ws).with_context(|| format!("stage {} failed", stage.name()))?;
    let record = StageRecord {
        status: StageStatus::Ran,
        config_hash,
        inputs,
        outputs: ws.hash_outputs(stage.outputs())?,
        duration_s: started.elapsed().as_secs_f64(),
    };
    eprintln!("{}: done in {:.2}s", stage.name(), record.duration_s);
    manifest.stages.insert(stage.name().to_string(), record);
    ws.save_manifest(&manifest)?;
    Ok(StageStatus::Ran)
}

fn execute(stage: Stage, config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    match stage {
        Stage::Ingest => ingest(config, ws),
        Stage::PrepareTraining => prepare_training(config, ws),
        Stage::EmbedMergePool => embed_merge_pool(config, ws),
        Stage::Cluster => cluster(config, ws),
        Stage::Evaluate => evaluate(config, ws),
        Stage::Project => project(config, ws),
        Stage::Bench => bench(config, ws),
    }
}

fn ingest(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let store = ingest_corpus(&config.paths.corpus, config.paths.format)?;
    let (kept, excluded) = clean_corpus(store.documents(), &config.cleaning)?;
    if kept.is_empty() {
        bail!(
            "no document survived cleaning ({} excluded, see {EXCLUSIONS})",
            excluded.len()
        );
    }
    ws.write_atomic(CLEAN_CORPUS, |w| Ok(write_clean_jsonl(w, &kept)?))?;
    ws.write_atomic(EXCLUSIONS, |w| {
        serde_json::to_writer_pretty(&mut *w, &excluded)?;
        Ok(w.write_all(b"\n")?)
    })?;
    eprintln!(
        "ingest: kept {} documents, excluded {}",
        kept.len(),
        excluded.len()
    );
    Ok(())
}

fn tokenizer(config: &PipelineConfig) -> StubTokenizer {
    StubTokenizer {
        vocab_size: config.training.vocab_size,
        ..StubTokenizer::default()
    }
}

fn load_clean(ws: &Workspace) -> Result<Vec<CleanDocument>> {
    Ok(read_clean_jsonl(
        &ws.require(CLEAN_CORPUS, Stage::Ingest.name())?,
    )?)
}

fn prepare_training(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let docs = load_clean(ws)?;
    let prep = config.training_prep()?;
    let tokenizer = tokenizer(config);
    let tokens: Vec<TokenizedDocument> = docs.iter().map(|d| tokenizer.tokenize(d)).collect();
    let samples = prepare_training_samples(&tokens, &prep)?;
    ws.write_atomic(TOKENS, |w| {
        for t in &tokens {
            serde_json::to_writer(&mut *w, t)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    ws.write_atomic(TRAINING_SAMPLES, |w| {
        Ok(write_training_jsonl(w, &samples.samples)?)
    })?;
    eprintln!(
        "prepare-training: {} samples from {} batches, {} tokens dropped",
        samples.samples.len(),
        samples.batches,
        samples.dropped_tokens
    );
    Ok(())
}

/// Builds the configured provider and the token sequences it expects, then
/// hands both to `f`.
fn with_provider<R>(
    config: &PipelineConfig,
    docs: &[CleanDocument],
    delay: Duration,
    f: impl FnOnce(&dyn EmbeddingProvider, Vec<TokenizedDocument>) -> Result<R>,
) -> Result<R> {
    let p = &config.provider;
    match p.kind {
        ProviderKind::Stub => {
            let tokenizer = tokenizer(config);
            let tokens = docs.iter().map(|d| tokenizer.tokenize(d)).collect();
            let provider = StubProvider::new(p.dim, config.training.vocab_size, p.seed)?
                .with_name(p.name.clone())
                .with_context(p.context);
            if delay.is_zero() {
                f(&provider, tokens)
            } else {
                f(&DelayedProvider::new(provider, delay), tokens)
            }
        }
        ProviderKind::Interchange => {
            let dir = p
                .embeddings_dir
                .as_ref()
                .ok_or_else(|| anyhow!("provider.embeddings_dir is not set"))?;
            let provider = InterchangeProvider::load_dir(p.name.clone(), dir)?;
            // Token ids do not matter for recorded embeddings; the alignment
            // carried by each record does.
            let tokens = docs
                .iter()
                .map(|d| {
                    let record = provider.record(d.id()).ok_or_else(|| {
                        anyhow!(
                            "no embeddings recorded for document {:?} in {}",
                            d.id(),
                            dir.display()
                        )
                    })?;
                    Ok(TokenizedDocument::new(
                        d.id(),
                        vec![0; record.len()],
                        record.alignment.clone(),
                    )?)
                })
                .collect::<Result<_>>()?;
            if delay.is_zero() {
                f(&provider, tokens)
            } else {
                f(&DelayedProvider::new(provider, delay), tokens)
            }
        }
    }
}

fn embed_merge_pool(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let docs = load_clean(ws)?;
    let spec = config.inference_spec()?;
    let model = fit_tfidf(&docs)?;
    let (windows, pooled) = with_provider(config, &docs, Duration::ZERO, |provider, tokens| {
        let windows = tokens
            .iter()
            .map(|t| inference_windows(t, spec))
            .collect::<docflow_core::Result<Vec<_>>>()?
            .concat();
        let pooled = vectorize_documents(provider, &docs, &tokens, &model, spec)?;
        Ok((windows, pooled))
    })?;
    let fallbacks = pooled.iter().filter(|p| p.unweighted_fallback).count();
    let vectors: Vec<DocVector> = pooled.into_iter().map(|p| p.vector).collect();
    ws.write_atomic(WINDOWS, |w| Ok(write_window_manifest(w, &windows)?))?;
    ws.write_atomic(DOC_VECTORS, |mut w| {
        Ok(write_doc_vectors(&mut w, &vectors)?)
    })?;
    ws.write_atomic(DOC_INDEX, |w| Ok(write_doc_index(w, &vectors)?))?;
    eprintln!(
        "embed-merge-pool: {} documents, {} windows, {} pooled without weights",
        vectors.len(),
        windows.len(),
        fallbacks
    );
    Ok(())
}

fn load_vectors(ws: &Workspace) -> Result<(Vec<String>, Matrix)> {
    let path = ws.require(DOC_VECTORS, Stage::EmbedMergePool.name())?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let docs = read_doc_vectors(&mut BufReader::new(file))?;
    if docs.is_empty() {
        bail!("{DOC_VECTORS} holds no documents");
    }
    let rows: Vec<&[f64]> = docs.iter().map(|d| d.vector.as_slice()).collect();
    let matrix = Matrix::from_rows(&rows)?;
    Ok((docs.into_iter().map(|d| d.doc_id).collect(), matrix))
}

fn load_model(ws: &Workspace) -> Result<ClusterModel> {
    let path = ws.require(CLUSTER_MODEL, Stage::Cluster.name())?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))
}

fn cluster(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (ids, vectors) = load_vectors(ws)?;
    let candidates = &config.clustering.candidates;
    let largest = *candidates.last().expect("validated non-empty");
    if largest > vectors.rows() {
        bail!(
            "clustering.candidates go up to K = {largest} but only {} documents were embedded",
            vectors.rows()
        );
    }
    let kmeans = config.clustering.kmeans();
    let (curve, model) = if candidates.len() == 1 {
        let model = kmeans_fit(&vectors, &kmeans)?;
        (vec![(model.k(), model.inertia, 0.0, true)], model)
    } else {
        let (elbow, model) = select_k_elbow(&vectors, candidates, &kmeans)?;
        if !elbow.violations.is_empty() {
            eprintln!("cluster: inertia rose with K at {:?}", elbow.violations);
        }
        let curve = elbow
            .candidates
            .iter()
            .zip(&elbow.knee_scores)
            .map(|(&(k, inertia), &score)| (k, inertia, score, k == elbow.chosen_k))
            .collect();
        (curve, model)
    };
    ws.write_atomic(CLUSTER_MODEL, |w| {
        serde_json::to_writer_pretty(&mut *w, &model)?;
        Ok(w.write_all(b"\n")?)
    })?;
    ws.write_atomic(ASSIGNMENTS, |w| {
        writeln!(w, "doc_id,cluster")?;
        for (id, c) in ids.iter().zip(&model.assignments) {
            writeln!(w, "{},{c}", csv_field(id))?;
        }
        Ok(())
    })?;
    ws.write_atomic(ELBOW, |w| {
        writeln!(w, "k,inertia,knee_score,chosen")?;
        for (k, inertia, score, chosen) in &curve {
            writeln!(w, "{k},{inertia},{score},{chosen}")?;
        }
        Ok(())
    })?;
    eprintln!(
        "cluster: K = {} over {} documents, inertia {:.4}",
        model.k(),
        ids.len(),
        model.inertia
    );
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    provider: &'a str,
    documents: usize,
    k: usize,
    metrics: [MetricReport; 2],
}

fn evaluate(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (_, vectors) = load_vectors(ws)?;
    let model = load_model(ws)?;
    let report = centroid_similarity_stats(&model, &vectors)?;
    let label = config.provider.name.as_str();
    let out = EvaluationReport {
        provider: label,
        documents: vectors.rows(),
        k: model.k(),
        metrics: report.metric_reports(),
    };
    ws.write_atomic(REPORT, |w| {
        serde_json::to_writer_pretty(&mut *w, &out)?;
        Ok(w.write_all(b"\n")?)
    })?;
    ws.write_atomic(REPORT_PAIRWISE, |w| {
        Ok(write_report_csv(w, &[(label, &report.pairwise_summary)])?)
    })?;
    ws.write_atomic(REPORT_CENTROID, |w| {
        Ok(write_report_csv(w, &[(label, &report.centroid_summary)])?)
    })?;
    eprintln!(
        "evaluate: mean pairwise similarity {:.4}, mean centroid similarity {:.4}",
        report.pairwise_summary.mean, report.centroid_summary.mean
    );
    Ok(())
}

fn project(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (ids, vectors) = load_vectors(ws)?;
    let model = load_model(ws)?;
    let n = vectors.rows();
    if n > 1 && config.projection.perplexity >= n as f64 {
        bail!(
            "projection.perplexity = {} must be below the number of documents ({n})",
            config.projection.perplexity
        );
    }
    let vectors = if config.clustering.normalize_inputs {
        vectors.normalized_rows()?
    } else {
        vectors
    };
    let projection = project_tsne(&vectors, &config.projection)?;
    ws.write_atomic(PROJECTION, |w| {
        Ok(write_projection_csv(
            w,
            &ids,
            &projection,
            &model.assignments,
        )?)
    })?;
    eprintln!(
        "project: KL divergence {:.4} -> {:.4}",
        projection.initial_kl, projection.final_kl
    );
    Ok(())
}

fn bench(config: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let docs = load_clean(ws)?;
    let docs = &docs[..config.bench.docs.min(docs.len())];
    let spec = config.inference_spec()?;
    let delay = Duration::from_millis(config.bench.delay_ms);
    let report = with_provider(config, docs, delay, |provider, tokens| {
        Ok(measure_throughput(provider, &tokens, spec)?)
    })?;
    let reports = [report];
    ws.write_atomic(THROUGHPUT, |w| Ok(write_throughput_table(w, &reports)?))?;
    ws.write_atomic(THROUGHPUT_DETAIL, |w| {
        Ok(write_throughput_csv(w, &reports)?)
    })?;
    eprintln!(
        "bench: {} documents in {:.2}s, {:.2} docs/min",
        reports[0].docs_processed, reports[0].elapsed_s, reports[0].docs_per_minute
    );
    Ok(())
}
