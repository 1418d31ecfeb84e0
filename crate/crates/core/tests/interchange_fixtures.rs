//! Files exchanged with the embedding exporter, read from checked-in fixtures
//! written by an independent implementation of each format.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use docflow_core::chunker::{
    inference_windows, prepare_training_samples, read_window_manifest, slot_overlap,
    write_training_jsonl, write_window_manifest, Objective, SlotMode, SlotSpec, TokenizedDocument,
    TrainingPrep, TrainingSample, WindowKind,
};
use docflow_core::corpus::read_clean_jsonl;
use docflow_core::interchange::{
    read_doc_vectors, read_record, read_record_file, write_doc_vectors, write_record,
};
use docflow_core::provider::{embed_document, vectorize_documents, InterchangeProvider};
use docflow_core::vectorizer::fit_tfidf;
use docflow_core::Error;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn fixture_spec() -> SlotSpec {
    SlotSpec::new(8, 2).unwrap()
}

fn tokenized(provider: &InterchangeProvider, id: &str) -> TokenizedDocument {
    let record = provider.record(id).unwrap();
    // Token ids are irrelevant to recorded embeddings; alignment is what matters.
    TokenizedDocument::new(id, vec![5; record.len()], record.alignment.clone()).unwrap()
}

#[test]
fn fixture_records_validate() {
    let records = read_record_file(&fixtures().join("embeddings/beta_gamma.dfe")).unwrap();
    let ids: Vec<&str> = records.iter().map(|r| r.doc_id.as_str()).collect();
    assert_eq!(ids, ["beta", "gamma"]);
    for r in &records {
        r.validate().unwrap();
        assert_eq!(r.dim, 4);
    }
    let kinds: Vec<WindowKind> = records[0].windows.iter().map(|w| w.window().kind).collect();
    assert_eq!(kinds, [WindowKind::Initial, WindowKind::Final]);
}

#[test]
fn rewriting_a_fixture_reproduces_its_bytes() {
    for name in ["alpha.dfe", "beta_gamma.dfe"] {
        let path = fixtures().join("embeddings").join(name);
        let original = fs::read(&path).unwrap();
        let mut rewritten = Vec::new();
        for r in read_record_file(&path).unwrap() {
            write_record(&mut rewritten, &r).unwrap();
        }
        assert_eq!(rewritten, original, "{name}");
    }
}

#[test]
fn merged_rows_come_from_the_planned_window() {
    let provider =
        InterchangeProvider::load_dir("fixture", &fixtures().join("embeddings")).unwrap();
    assert_eq!(provider.len(), 3);
    // Fixture values are window * 100 + position + d / 4.
    for (id, owners) in [
        ("alpha", vec![0; 7]),
        ("beta", [vec![0; 7], vec![1; 6]].concat()),
        ("gamma", [vec![0; 5], vec![1; 5]].concat()),
    ] {
        let doc = tokenized(&provider, id);
        let seq = embed_document(&provider, &doc, fixture_spec()).unwrap();
        assert_eq!(seq.len(), owners.len(), "{id}");
        for (p, &w) in owners.iter().enumerate() {
            let expected: Vec<f32> = (0..4)
                .map(|d| (w * 100 + p) as f32 + d as f32 * 0.25)
                .collect();
            assert_eq!(seq.row(p), expected.as_slice(), "{id} position {p}");
        }
    }
}

#[test]
fn fixture_corpus_pools_through_recorded_embeddings() {
    let docs = read_clean_jsonl(&fixtures().join("corpus.clean.jsonl")).unwrap();
    let provider =
        InterchangeProvider::load_dir("fixture", &fixtures().join("embeddings")).unwrap();
    let tokens: Vec<TokenizedDocument> =
        docs.iter().map(|d| tokenized(&provider, d.id())).collect();
    let model = fit_tfidf(&docs).unwrap();
    let pooled = vectorize_documents(&provider, &docs, &tokens, &model, fixture_spec()).unwrap();
    assert_eq!(pooled.len(), 3);
    for p in &pooled {
        assert!(!p.unweighted_fallback);
        assert_eq!(p.vector.vector.len(), 4);
        // Every component of a row differs by d / 4 from the first one, and
        // pooling is an affine combination, so the offsets survive.
        let v = &p.vector.vector;
        for d in 1..4 {
            assert!((v[d] - v[0] - d as f64 * 0.25).abs() < 1e-9);
        }
    }

    let vectors: Vec<_> = pooled.into_iter().map(|p| p.vector).collect();
    let mut buf = Vec::new();
    write_doc_vectors(&mut buf, &vectors).unwrap();
    let back = read_doc_vectors(&mut Cursor::new(buf)).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in back.iter().zip(&vectors) {
        assert_eq!(a.doc_id, b.doc_id);
        for (x, y) in a.vector.iter().zip(&b.vector) {
            assert!((x - y).abs() <= 1e-6 * y.abs().max(1.0));
        }
    }
}

#[test]
fn mismatched_windows_are_a_provider_error() {
    let provider =
        InterchangeProvider::load_dir("fixture", &fixtures().join("embeddings")).unwrap();
    let doc = tokenized(&provider, "beta");
    let err = embed_document(&provider, &doc, SlotSpec::new(6, 1).unwrap()).unwrap_err();
    assert!(
        matches!(err, Error::Provider { ref doc_id, .. } if doc_id == "beta"),
        "{err}"
    );
}

#[test]
fn truncated_and_corrupt_records_are_rejected() {
    let bytes = fs::read(fixtures().join("embeddings/alpha.dfe")).unwrap();
    for cut in [2, 10, 30, bytes.len() - 1] {
        let err = read_record(&mut Cursor::new(&bytes[..cut])).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "cut at {cut}: {err}");
    }
    let mut bad_magic = bytes.clone();
    bad_magic[3] = b'9';
    assert!(read_record(&mut Cursor::new(bad_magic)).is_err());
}

#[test]
fn window_manifest_matches_hand_derived_fixture() {
    let mut windows = slot_overlap("long", 300, SlotSpec::TRAINING).windows;
    let short = TokenizedDocument::new("short", vec![5; 100], (0..100).collect()).unwrap();
    windows.extend(inference_windows(&short, SlotSpec::INFERENCE).unwrap());
    let mut buf = Vec::new();
    write_window_manifest(&mut buf, &windows).unwrap();
    let expected = fs::read_to_string(fixtures().join("windows.csv")).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), expected);
    assert_eq!(read_window_manifest(expected.as_bytes()).unwrap(), windows);
}

#[test]
fn clm_training_jsonl_matches_hand_derived_fixture() {
    let docs = [
        TokenizedDocument::new("a", vec![10, 11, 12, 13], (0..4).collect()).unwrap(),
        TokenizedDocument::new("b", vec![20, 21, 22], (0..3).collect()).unwrap(),
    ];
    let prep = TrainingPrep {
        mode: SlotMode::Overlap,
        spec: SlotSpec::new(4, 2).unwrap(),
        objective: Objective::Clm,
        ..TrainingPrep::default()
    };
    let out = prepare_training_samples(&docs, &prep).unwrap();
    let mut buf = Vec::new();
    write_training_jsonl(&mut buf, &out.samples).unwrap();
    let expected = fs::read_to_string(fixtures().join("training_clm.jsonl")).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), expected);
    let parsed: Vec<TrainingSample> = expected
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(parsed, out.samples);
}

#[test]
fn mlm_labels_point_at_changed_or_kept_positions() {
    let docs: Vec<TokenizedDocument> = (0..4)
        .map(|i| {
            TokenizedDocument::new(format!("d{i}"), (100..400).collect(), (0..300).collect())
                .unwrap()
        })
        .collect();
    let out = prepare_training_samples(&docs, &TrainingPrep::default()).unwrap();
    assert!(!out.samples.is_empty());
    for s in &out.samples {
        assert_eq!(s.tokens.len(), 128);
        assert_eq!(s.mlm_labels.len(), 19);
        for &(pos, original) in &s.mlm_labels {
            assert!(pos < 128);
            assert!((100..400).contains(&original));
        }
    }
    let line = serde_json::to_string(&out.samples[0]).unwrap();
    assert!(line.contains("\"mlm_labels\":[["));
}
