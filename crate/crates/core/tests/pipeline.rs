mod common;

use docflow_core::chunker::SlotSpec;
use docflow_core::clusterer::inertia;
use docflow_core::corpus::{clean_corpus, CleaningPolicy, RawDocument};
use docflow_core::evaluator::{cosine, project_tsne, ProjectionConfig};
use docflow_core::provider::{vectorize_documents, StubProvider, StubTokenizer};
use docflow_core::synthetic::TopicCorpusConfig;
use docflow_core::vectorizer::fit_tfidf;

fn small_corpus() -> TopicCorpusConfig {
    TopicCorpusConfig {
        topics: 3,
        docs_per_topic: 40,
        min_words: 200,
        max_words: 900,
        seed: 21,
        ..TopicCorpusConfig::default()
    }
}

#[test]
fn small_pipeline_recovers_planted_topics() {
    let run = common::run_synthetic_pipeline(&small_corpus(), 32, &[2, 3, 4, 5, 6, 7, 8]);
    assert_eq!(run.elbow.chosen_k, 3);
    assert!(common::adjusted_rand_index(&run.labels, &run.model.assignments) > 0.99);
    assert_eq!(
        run.report.per_group.iter().map(|g| g.size).sum::<usize>(),
        120
    );
    for g in &run.report.per_group {
        assert!(g.pairwise_mean <= g.centroid_mean + 1e-9);
        assert!((-1.0..=1.0).contains(&g.pairwise_mean) && (-1.0..=1.0).contains(&g.centroid_mean));
    }
    let stored = inertia(&run.model, &run.vectors).unwrap();
    assert!((stored - run.model.inertia).abs() <= 1e-9 * stored.max(1.0));
}

#[test]
fn pipeline_is_deterministic() {
    let a = common::run_synthetic_pipeline(&small_corpus(), 16, &[2, 3, 4, 5]);
    let b = common::run_synthetic_pipeline(&small_corpus(), 16, &[2, 3, 4, 5]);
    assert_eq!(a.vectors, b.vectors);
    assert_eq!(a.model, b.model);
    assert_eq!(a.centroid_csv, b.centroid_csv);
}

#[test]
fn markup_and_case_do_not_change_the_document_vector() {
    let plain = RawDocument {
        id: "a".into(),
        text: "the regional court upheld the overtime claim after reviewing the payroll evidence"
            .into(),
    };
    let noisy = RawDocument {
        id: "a".into(),
        text: "<p>The  Regional COURT upheld the <b>overtime</b> claim&nbsp;after reviewing\n the payroll evidence</p>"
            .into(),
    };
    let policy = CleaningPolicy::default();
    let (a, _) = clean_corpus(&[plain], &policy).unwrap();
    let (b, _) = clean_corpus(&[noisy], &policy).unwrap();
    assert_eq!(a[0].words(), b[0].words());

    let tokenizer = StubTokenizer::default();
    let provider = StubProvider::new(8, tokenizer.vocab_size, 1).unwrap();
    let model = fit_tfidf(&a).unwrap();
    let pool = |docs: &[docflow_core::corpus::CleanDocument]| {
        let tokens = vec![tokenizer.tokenize(&docs[0])];
        vectorize_documents(&provider, docs, &tokens, &model, SlotSpec::INFERENCE).unwrap()
    };
    assert_eq!(pool(&a)[0].vector, pool(&b)[0].vector);
}

#[test]
fn long_documents_use_several_windows_and_stay_close_to_short_ones() {
    // The same topic text repeated: windows differ but the pooled direction
    // barely moves.
    let sentence = "appeal overtime wages employer hearing testimony ";
    let short = RawDocument {
        id: "short".into(),
        text: sentence.repeat(20),
    };
    let long = RawDocument {
        id: "long".into(),
        text: sentence.repeat(400),
    };
    let (docs, _) = clean_corpus(&[short, long], &CleaningPolicy::default()).unwrap();
    let tokenizer = StubTokenizer::default();
    let tokens: Vec<_> = docs.iter().map(|d| tokenizer.tokenize(d)).collect();
    assert!(tokens[1].len() > 3 * 510);
    let provider = StubProvider::new(32, tokenizer.vocab_size, 2).unwrap();
    let model = fit_tfidf(&docs).unwrap();
    let pooled =
        vectorize_documents(&provider, &docs, &tokens, &model, SlotSpec::INFERENCE).unwrap();
    let c = cosine(&pooled[0].vector.vector, &pooled[1].vector.vector).unwrap();
    assert!(c > 0.99, "{c}");
}

#[test]
fn projection_of_pipeline_vectors_keeps_clusters_apart() {
    let run = common::run_synthetic_pipeline(&small_corpus(), 16, &[2, 3, 4]);
    let config = ProjectionConfig::default();
    let projection = project_tsne(&run.vectors, &config).unwrap();
    assert!(projection.final_kl < projection.initial_kl);
    let pts = &projection.points;
    let mut agreeing = 0;
    for (i, p) in pts.iter().enumerate() {
        let mut near: Vec<(f64, usize)> = pts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), j))
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let same = near[..5]
            .iter()
            .filter(|&&(_, j)| run.labels[j] == run.labels[i])
            .count();
        if same >= 3 {
            agreeing += 1;
        }
    }
    assert_eq!(agreeing, pts.len());
}
