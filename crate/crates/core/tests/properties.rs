mod common;

use docflow_core::chunker::{inference_windows, SlotSpec, TokenizedDocument};
use docflow_core::clusterer::{kmeans_fit, KMeansConfig};
use docflow_core::evaluator::{centroid_similarity_stats, cosine, group_pairwise_mean, summarize};
use docflow_core::provider::{embed_document, EmbeddingProvider, StubProvider};
use docflow_core::vectorizer::weighted_mean;
use docflow_core::Matrix;
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, dim)
        .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_is_symmetric_and_scale_free(
        (a, b) in (1usize..16).prop_flat_map(|d| (vector(d), vector(d))),
        alpha in 0.01..100.0f64,
        beta in 0.01..100.0f64,
    ) {
        let ab = cosine(&a, &b).unwrap();
        prop_assert!((ab - cosine(&b, &a).unwrap()).abs() <= 1e-12);
        let sa: Vec<f64> = a.iter().map(|x| x * alpha).collect();
        let sb: Vec<f64> = b.iter().map(|x| x * beta).collect();
        prop_assert!((ab - cosine(&sa, &sb).unwrap()).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn pairwise_identity_matches_enumeration(
        group in (1usize..12).prop_flat_map(|d| prop::collection::vec(vector(d), 1..40)),
    ) {
        let fast = group_pairwise_mean(&group).unwrap();
        prop_assert!((fast - common::pairwise_by_enumeration(&group)).abs() <= 1e-9);
    }

    #[test]
    fn pairwise_never_exceeds_centroid_after_spherical_kmeans(
        rows in (2usize..8).prop_flat_map(|d| prop::collection::vec(vector(d), 6..60)),
        k in 1usize..5,
        seed in 0u64..1000,
    ) {
        let m = Matrix::from_rows(&rows).unwrap().normalized_rows().unwrap();
        let k = k.min(m.rows());
        let model = kmeans_fit(&m, &KMeansConfig { k, seed, restarts: 1, ..KMeansConfig::default() }).unwrap();
        let report = centroid_similarity_stats(&model, &m).unwrap();
        for g in &report.per_group {
            prop_assert!(g.pairwise_mean <= g.centroid_mean + 1e-9, "{g:?}");
        }
        prop_assert_eq!(report.per_group.iter().map(|g| g.size).sum::<usize>(), m.rows());
    }

    #[test]
    fn lloyd_trace_never_rises(
        rows in (1usize..6).prop_flat_map(|d| prop::collection::vec(vector(d), 4..80)),
        k in 1usize..6,
        seed in 0u64..1000,
        normalize in any::<bool>(),
    ) {
        let m = Matrix::from_rows(&rows).unwrap();
        let k = k.min(m.rows());
        let config = KMeansConfig { k, seed, normalize_inputs: normalize, ..KMeansConfig::default() };
        let model = kmeans_fit(&m, &config).unwrap();
        for w in model.inertia_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", model.inertia_trace);
        }
        prop_assert!(model.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn summarize_matches_sorting_oracle(values in prop::collection::vec(-1e3..1e3f64, 1..300)) {
        let s = summarize(&values).unwrap();
        let want = common::summary_by_sorting(&values);
        let got = [s.mean, s.std, s.min, s.q25, s.q50, s.q75, s.max];
        for (g, w) in got.iter().zip(want) {
            prop_assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0));
        }
        prop_assert!(s.min <= s.q25 && s.q25 <= s.q50 && s.q50 <= s.q75 && s.q75 <= s.max);
    }

    /// Without context mixing every window computes the same row for a token,
    /// so the merged sequence equals a direct lookup whatever the windowing.
    #[test]
    fn merged_stub_rows_equal_direct_lookup(
        tokens in prop::collection::vec(5u32..200, 1..400),
        n in 2usize..64,
        k_frac in 0.0..1.0f64,
    ) {
        let k = ((n as f64 * k_frac) as usize).min(n - 1);
        let len = tokens.len();
        let doc = TokenizedDocument::new("p", tokens.clone(), (0..len as i32).collect()).unwrap();
        let provider = StubProvider::new(6, 200, 4).unwrap().with_context(0.0);
        let spec = SlotSpec::new(n, k).unwrap();
        let seq = embed_document(&provider, &doc, spec).unwrap();
        prop_assert_eq!(seq.len(), len);
        for (p, &t) in tokens.iter().enumerate() {
            prop_assert_eq!(seq.row(p), provider.token_vector(t));
        }
        prop_assert_eq!(provider.dimension(), 6);
        prop_assert!(!inference_windows(&doc, spec).unwrap().is_empty());
    }

    #[test]
    fn uniform_weights_give_the_plain_mean(
        rows in (1usize..8).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-5.0..5.0f32, d), 1..50)),
        w in 0.1..10.0f64,
    ) {
        let dim = rows[0].len();
        let weights = vec![w; rows.len()];
        let (pooled, fallback) = weighted_mean(rows.iter().map(Vec::as_slice), &weights, dim).unwrap();
        prop_assert!(!fallback);
        for d in 0..dim {
            let mean = rows.iter().map(|r| r[d] as f64).sum::<f64>() / rows.len() as f64;
            prop_assert!((pooled[d] - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        }
    }
}
