//! Seeded synthetic data: labelled topic corpora and Gaussian blobs.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::RawDocument;
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

/// Minimum centre distance, in units of the blob standard deviation.
pub const MIN_CENTRE_GAP: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCorpusConfig {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// Distinct words owned by each topic.
    pub topic_vocab: usize,
    /// Words shared by every topic.
    pub shared_vocab: usize,
    /// Probability that a word is drawn from the shared pool.
    pub shared_rate: f64,
    pub seed: u64,
}

impl Default for TopicCorpusConfig {
    fn default() -> Self {
        Self {
            topics: 5,
            docs_per_topic: 400,
            min_words: 300,
            max_words: 700,
            topic_vocab: 24,
            shared_vocab: 60,
            shared_rate: 0.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub documents: Vec<RawDocument>,
    /// Generating topic of each document.
    pub labels: Vec<usize>,
}

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ner", "pa", "qui", "ros", "ta", "ve", "zu", "bra", "cen", "dor", "fi",
    "gal", "hu", "jem", "lus", "mon", "ost", "pri", "sal", "tor", "vin",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(2..=4);
    (0..n)
        .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
        .collect()
}

/// Documents interleaved by topic (`doc-00000` is topic 0, `doc-00001`
/// topic 1, ...). Topic words follow a Zipf-like frequency profile.
pub fn topic_corpus(config: &TopicCorpusConfig) -> Result<SyntheticCorpus> {
    if config.topics == 0 || config.topic_vocab == 0 || config.min_words == 0 {
        return Err(Error::contract(
            "topic corpus needs topics, vocabulary and words",
        ));
    }
    if config.min_words > config.max_words {
        return Err(Error::contract("min_words exceeds max_words"));
    }
    if !(0.0..1.0).contains(&config.shared_rate)
        || (config.shared_vocab == 0 && config.shared_rate > 0.0)
    {
        return Err(Error::contract(
            "shared_rate must be in [0, 1) with a non-empty shared pool",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seen = BTreeSet::new();
    let mut fresh = |rng: &mut ChaCha8Rng, count: usize| -> Vec<String> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let w = pseudo_word(rng);
            if seen.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    };
    let shared = fresh(&mut rng, config.shared_vocab);
    let topics: Vec<Vec<String>> = (0..config.topics)
        .map(|_| fresh(&mut rng, config.topic_vocab))
        .collect();
    let zipf = WeightedIndex::new((1..=config.topic_vocab).map(|r| 1.0 / r as f64))
        .expect("positive weights");

    let total = config.topics * config.docs_per_topic;
    let mut documents = Vec::with_capacity(total);
    let mut labels = Vec::with_capacity(total);
    for i in 0..total {
        let topic = i % config.topics;
        let len = rng.random_range(config.min_words..=config.max_words);
        let mut words = Vec::with_capacity(len);
        for _ in 0..len {
            let word = if rng.random::<f64>() < config.shared_rate {
                &shared[rng.random_range(0..shared.len())]
            } else {
                &topics[topic][zipf.sample(&mut rng)]
            };
            words.push(word.as_str());
        }
        documents.push(RawDocument {
            id: format!("doc-{i:05}"),
            text: words.join(" "),
        });
        labels.push(topic);
    }
    Ok(SyntheticCorpus { documents, labels })
}

/// `k` isotropic Gaussian blobs of `per_cluster` points each. Centres are
/// drawn uniformly from `[-separation, separation]^dim` and redrawn until
/// every pair is at least `MIN_CENTRE_GAP * spread` apart, so the planted
/// labels are recoverable.
pub fn gaussian_blobs(
    k: usize,
    per_cluster: usize,
    dim: usize,
    spread: f64,
    separation: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    if k == 0 || per_cluster == 0 || dim == 0 {
        return Err(Error::contract(
            "blobs need k, per_cluster and dim above zero",
        ));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::contract(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_gap = MIN_CENTRE_GAP * spread;
    let mut centres: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut attempts = 0;
        loop {
            let c: Vec<f64> = (0..dim)
                .map(|_| rng.random_range(-separation..=separation))
                .collect();
            if centres
                .iter()
                .all(|o| squared_distance(o, &c).sqrt() >= min_gap)
            {
                centres.push(c);
                break;
            }
            attempts += 1;
            if attempts == 10_000 {
                return Err(Error::contract(format!(
                    "cannot place {k} centres {min_gap} apart inside [-{separation}, {separation}]^{dim}"
                )));
            }
        }
    }
    let mut data = Vec::with_capacity(k * per_cluster * dim);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for i in 0..k * per_cluster {
        let c = i % k;
        data.extend(centres[c].iter().map(|x| x + noise.sample(&mut rng)));
        labels.push(c);
    }
    Ok((Matrix::from_vec(k * per_cluster, dim, data)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded_and_labelled() {
        let config = TopicCorpusConfig {
            docs_per_topic: 3,
            min_words: 5,
            max_words: 9,
            ..Default::default()
        };
        let a = topic_corpus(&config).unwrap();
        assert_eq!(a, topic_corpus(&config).unwrap());
        assert_eq!(a.documents.len(), 15);
        assert_eq!(&a.labels[..6], &[0, 1, 2, 3, 4, 0]);
        for d in &a.documents {
            let n = d.text.split(' ').count();
            assert!((5..=9).contains(&n));
        }
    }

    #[test]
    fn blobs_have_requested_shape() {
        let (m, labels) = gaussian_blobs(3, 4, 2, 0.1, 10.0, 1).unwrap();
        assert_eq!((m.rows(), m.cols()), (12, 2));
        assert_eq!(labels.iter().filter(|&&l| l == 2).count(), 4);
    }
}
