//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use docflow_core::chunker::{SlotSpec, TokenizedDocument};
use docflow_core::clusterer::{
    default_candidates, select_k_elbow, ClusterModel, ElbowResult, KMeansConfig,
};
use docflow_core::corpus::{clean_corpus, CleanDocument, CleaningPolicy};
use docflow_core::evaluator::{
    centroid_similarity_stats, write_report_csv, GroupSimilarityReport, Metric,
};
use docflow_core::provider::{vectorize_documents, StubProvider, StubTokenizer};
use docflow_core::synthetic::{topic_corpus, TopicCorpusConfig};
use docflow_core::vectorizer::fit_tfidf;
use docflow_core::Matrix;

/// Adjusted Rand index from the contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let pairs = |c: f64| c * (c - 1.0) / 2.0;
    let index: f64 = table.values().copied().map(pairs).sum();
    let sum_rows: f64 = rows.values().copied().map(pairs).sum();
    let sum_cols: f64 = cols.values().copied().map(pairs).sum();
    let expected = sum_rows * sum_cols / pairs(n);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Mean cosine over all unordered pairs, by enumeration.
pub fn pairwise_by_enumeration(group: &[Vec<f64>]) -> f64 {
    if group.len() == 1 {
        return 1.0;
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut total = 0.0;
    let mut count = 0.0;
    for i in 0..group.len() {
        for j in (i + 1)..group.len() {
            let dot: f64 = group[i].iter().zip(&group[j]).map(|(x, y)| x * y).sum();
            total += dot / (norm(&group[i]) * norm(&group[j]));
            count += 1.0;
        }
    }
    total / count
}

/// Mean, sample std and linearly interpolated quartiles computed the slow way.
pub fn summary_by_sorting(values: &[f64]) -> [f64; 7] {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    let q = |p: f64| {
        let pos = p * (n as f64 - 1.0);
        let below = pos as usize;
        if below + 1 >= n {
            v[n - 1]
        } else {
            v[below] * (1.0 - (pos - below as f64)) + v[below + 1] * (pos - below as f64)
        }
    };
    [mean, var.sqrt(), v[0], q(0.25), q(0.5), q(0.75), v[n - 1]]
}

/// idf for every term, recomputed from raw word lists.
pub fn idf_by_counting(corpus: &[Vec<String>]) -> HashMap<String, f64> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for words in corpus {
        let mut seen: Vec<&String> = words.iter().collect();
        seen.sort();
        seen.dedup();
        for w in seen {
            *df.entry(w.clone()).or_default() += 1;
        }
    }
    let n = corpus.len() as f64;
    df.into_iter()
        .map(|(w, d)| (w, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
        .collect()
}

pub struct PipelineRun {
    pub documents: usize,
    pub labels: Vec<usize>,
    pub vectors: Matrix,
    pub elbow: ElbowResult,
    pub model: ClusterModel,
    pub report: GroupSimilarityReport,
    pub pairwise_csv: String,
    pub centroid_csv: String,
}

/// windows -> merge -> pool -> normalize -> elbow -> k-means -> evaluate on a
/// planted-topic corpus embedded by the stub provider.
pub fn run_synthetic_pipeline(
    corpus: &TopicCorpusConfig,
    dim: usize,
    candidates: &[usize],
) -> PipelineRun {
    let synthetic = topic_corpus(corpus).unwrap();
    let (docs, excluded) = clean_corpus(&synthetic.documents, &CleaningPolicy::default()).unwrap();
    assert!(
        excluded.is_empty(),
        "synthetic documents are long enough to keep"
    );
    let tokenizer = StubTokenizer::default();
    let tokenized: Vec<TokenizedDocument> = docs.iter().map(|d| tokenizer.tokenize(d)).collect();
    let tfidf = fit_tfidf(&docs).unwrap();
    let provider = StubProvider::new(dim, tokenizer.vocab_size, 11).unwrap();
    let pooled =
        vectorize_documents(&provider, &docs, &tokenized, &tfidf, SlotSpec::INFERENCE).unwrap();
    let rows: Vec<Vec<f64>> = pooled.into_iter().map(|p| p.vector.vector).collect();
    let vectors = Matrix::from_rows(&rows).unwrap().normalized_rows().unwrap();

    let config = KMeansConfig {
        seed: 3,
        ..KMeansConfig::default()
    };
    let (elbow, model) = select_k_elbow(&vectors, candidates, &config).unwrap();
    let report = centroid_similarity_stats(&model, &vectors).unwrap();
    let table = |metric: Metric| {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[("stub", report.summary(metric))]).unwrap();
        String::from_utf8(buf).unwrap()
    };
    PipelineRun {
        documents: docs.len(),
        labels: synthetic.labels,
        pairwise_csv: table(Metric::Pairwise),
        centroid_csv: table(Metric::Centroid),
        vectors,
        elbow,
        model,
        report,
    }
}

pub fn default_pipeline() -> PipelineRun {
    run_synthetic_pipeline(&TopicCorpusConfig::default(), 64, &default_candidates())
}

pub fn clean_docs(texts: &[&str]) -> Vec<CleanDocument> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| CleanDocument::new(format!("d{i}"), *t).unwrap())
        .collect()
}
