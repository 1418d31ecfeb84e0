use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::mix64;
use crate::linalg::{norm, squared_distance, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this (Euclidean).
    pub tolerance: f64,
    /// Cluster unit-normalized rows with unit-norm centroids, so Euclidean
    /// assignment and cosine assignment coincide.
    pub normalize_inputs: bool,
    /// Independent k-means++ starts; the lowest-inertia run is kept.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 8,
            seed: 0,
            max_iterations: 300,
            tolerance: 1e-4,
            normalize_inputs: true,
            restarts: 5,
        }
    }
}

impl KMeansConfig {
    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::contract("k must be >= 1"));
        }
        if self.max_iterations < 1 {
            return Err(Error::contract("max_iterations must be >= 1"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::contract("tolerance must be >= 0"));
        }
        if self.restarts < 1 {
            return Err(Error::contract("restarts must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub centroids: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after seeding, then after every assign + update iteration.
    pub inertia_trace: Vec<f64>,
    /// Whether the model was fit on unit-normalized inputs.
    pub normalized_inputs: bool,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Lloyd's algorithm from k-means++ seeding, best of `config.restarts` runs.
///
/// Empty clusters are repaired by moving in the point farthest from its
/// centroid. The result depends only on the inputs and the seed.
pub fn kmeans_fit(vectors: &Matrix, config: &KMeansConfig) -> Result<ClusterModel> {
    config.validate()?;
    let n = vectors.rows();
    if n < config.k {
        return Err(Error::contract(format!(
            "k = {} exceeds the number of vectors ({n})",
            config.k
        )));
    }
    if vectors.cols() == 0 {
        return Err(Error::contract("vectors have zero dimension"));
    }
    if vectors.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("vectors contain non-finite values"));
    }
    let data = if config.normalize_inputs {
        vectors.normalized_rows()?
    } else {
        vectors.clone()
    };

    let mut best: Option<ClusterModel> = None;
    for restart in 0..config.restarts {
        let seed = mix64(config.seed ^ mix64(restart as u64 + 1));
        let model = lloyd(&data, config, seed);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Sum of squared distances of every vector to its assigned centroid, with the
/// same input normalization the model was fit with.
pub fn inertia(model: &ClusterModel, vectors: &Matrix) -> Result<f64> {
    if vectors.cols() != model.centroids.cols() {
        return Err(Error::contract(format!(
            "vectors have dimension {}, model has {}",
            vectors.cols(),
            model.centroids.cols()
        )));
    }
    if vectors.rows() != model.assignments.len() {
        return Err(Error::contract(format!(
            "{} vectors but {} assignments",
            vectors.rows(),
            model.assignments.len()
        )));
    }
    let data = if model.normalized_inputs {
        vectors.normalized_rows()?
    } else {
        vectors.clone()
    };
    Ok(total_inertia(&data, &model.centroids, &model.assignments))
}

fn total_inertia(data: &Matrix, centroids: &Matrix, assignments: &[usize]) -> f64 {
    data.iter_rows()
        .zip(assignments)
        .map(|(x, &a)| squared_distance(x, centroids.row(a)))
        .sum()
}

fn lloyd(data: &Matrix, config: &KMeansConfig, seed: u64) -> ClusterModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(data, config.k, &mut rng);
    let mut assignments = assign(data, &centroids);
    let mut trace = vec![total_inertia(data, &centroids, &assignments)];
    let mut iterations_run = 0;

    for iter in 1..=config.max_iterations {
        iterations_run = iter;
        if iter > 1 {
            assignments = assign(data, &centroids);
        }
        repair_empty_clusters(data, &centroids, &mut assignments, config.k);
        let updated = update_centroids(data, &assignments, config.k, config.normalize_inputs);
        let shift = (0..config.k)
            .map(|c| squared_distance(centroids.row(c), updated.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        trace.push(total_inertia(data, &centroids, &assignments));
        if shift <= config.tolerance {
            break;
        }
    }
    ClusterModel {
        inertia: *trace.last().expect("trace is non-empty"),
        centroids,
        assignments,
        iterations_run,
        inertia_trace: trace,
        normalized_inputs: config.normalize_inputs,
    }
}

fn plus_plus_init(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = data.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = data
        .iter_rows()
        .map(|x| squared_distance(x, data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&nearest) {
            Ok(dist) => dist.sample(rng),
            // Every point coincides with a chosen centre.
            Err(_) => rng.random_range(0..n),
        };
        chosen.push(next);
        let c = data.row(next);
        nearest
            .par_iter_mut()
            .zip(data.as_slice().par_chunks(data.cols()))
            .for_each(|(d, x)| *d = d.min(squared_distance(x, c)));
    }
    data.select_rows(&chosen)
}

fn nearest_centroid(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter_rows().enumerate() {
        let d = squared_distance(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(data: &Matrix, centroids: &Matrix) -> Vec<usize> {
    data.as_slice()
        .par_chunks(data.cols())
        .map(|x| nearest_centroid(x, centroids).0)
        .collect()
}

fn repair_empty_clusters(data: &Matrix, centroids: &Matrix, assignments: &mut [usize], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        // Farthest point among clusters that can spare one; ties to the lowest index.
        let donor = (0..assignments.len())
            .filter(|&i| sizes[assignments[i]] > 1)
            .map(|i| {
                (
                    i,
                    squared_distance(data.row(i), centroids.row(assignments[i])),
                )
            })
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        if let Some((i, _)) = donor {
            sizes[assignments[i]] -= 1;
            assignments[i] = empty;
            sizes[empty] = 1;
        }
    }
}

fn update_centroids(data: &Matrix, assignments: &[usize], k: usize, spherical: bool) -> Matrix {
    let dim = data.cols();
    let mut sums = Matrix::zeros(k, dim);
    let mut counts = vec![0usize; k];
    for (x, &a) in data.iter_rows().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums.row_mut(a).iter_mut().zip(x) {
            *s += v;
        }
    }
    for c in 0..k {
        let row = sums.row_mut(c);
        if counts[c] > 0 {
            row.iter_mut().for_each(|s| *s /= counts[c] as f64);
        }
        if spherical {
            let len = norm(row);
            if len > 0.0 {
                row.iter_mut().for_each(|s| *s /= len);
            } else if let Some(first) = assignments.iter().position(|&a| a == c) {
                // Members cancel out exactly; any member direction is optimal.
                row.copy_from_slice(data.row(first));
            }
        }
    }
    sums
}
