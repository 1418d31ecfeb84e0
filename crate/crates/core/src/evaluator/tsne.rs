use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

/// Exact t-SNE settings. Early exaggeration (12x) and the low momentum phase
/// (0.5, then 0.8) cover the first quarter of the run, capped at 250 steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 42,
        }
    }
}

const EXAGGERATION: f64 = 12.0;
const MIN_GAIN: f64 = 0.01;
const P_FLOOR: f64 = 1e-12;
pub const MIN_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    /// KL(P || Q) at the random starting layout.
    pub initial_kl: f64,
    pub final_kl: f64,
}

impl ProjectionConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity >= 1.0) {
            return Err(Error::contract(format!(
                "perplexity {} must be at least 1",
                self.perplexity
            )));
        }
        if n > 1 && self.perplexity >= n as f64 {
            return Err(Error::contract(format!(
                "perplexity {} must be below the number of points ({n})",
                self.perplexity
            )));
        }
        if self.iterations < MIN_ITERATIONS {
            return Err(Error::contract(format!(
                "t-SNE needs at least {MIN_ITERATIONS} iterations"
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::contract("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Projects rows to two dimensions with exact (O(n^2)) t-SNE.
pub fn project_tsne(vectors: &Matrix, config: &ProjectionConfig) -> Result<Projection> {
    let n = vectors.rows();
    if n == 0 {
        return Err(Error::contract("nothing to project"));
    }
    config.validate(n)?;
    if n == 1 {
        return Ok(Projection {
            points: vec![[0.0, 0.0]],
            initial_kl: 0.0,
            final_kl: 0.0,
        });
    }
    let p = joint_probabilities(vectors, config.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let initial_kl = kl_divergence(&p, &y, n);

    let early = (config.iterations / 4).min(250);
    let mut update = vec![0.0f64; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    let mut num = vec![0.0; n * n];
    for iter in 0..config.iterations {
        let (exaggeration, momentum) = if iter < early {
            (EXAGGERATION, 0.5)
        } else {
            (1.0, 0.8)
        };
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                total += 2.0 * v;
            }
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let v = num[i * n + j];
                let coeff = (exaggeration * p[i * n + j] - v / total) * v;
                gx += coeff * (y[2 * i] - y[2 * j]);
                gy += coeff * (y[2 * i + 1] - y[2 * j + 1]);
            }
            grad[2 * i] = 4.0 * gx;
            grad[2 * i + 1] = 4.0 * gy;
        }
        for d in 0..2 * n {
            gains[d] = if (grad[d] > 0.0) != (update[d] > 0.0) {
                gains[d] + 0.2
            } else {
                (gains[d] * 0.8).max(MIN_GAIN)
            };
            update[d] = momentum * update[d] - config.learning_rate * gains[d] * grad[d];
            y[d] += update[d];
        }
        for axis in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + axis]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + axis] -= mean);
        }
    }
    let final_kl = kl_divergence(&p, &y, n);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("t-SNE diverged to non-finite coordinates"));
    }
    Ok(Projection {
        points: y.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        initial_kl,
        final_kl,
    })
}

/// Symmetrized affinities `(p_j|i + p_i|j) / 2n`, each conditional row
/// calibrated by bisection on the Gaussian precision so its entropy matches
/// `ln(perplexity)`.
fn joint_probabilities(vectors: &Matrix, perplexity: f64) -> Vec<f64> {
    let n = vectors.rows();
    let target = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    let mut dist = vec![0.0; n];
    for i in 0..n {
        for (j, d) in dist.iter_mut().enumerate() {
            *d = squared_distance(vectors.row(i), vectors.row(j));
        }
        let d_min = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist[j])
            .fold(f64::INFINITY, f64::min);
        let (mut beta, mut lo, mut hi) = (1.0, 0.0, f64::INFINITY);
        let row = &mut cond[i * n..(i + 1) * n];
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut weighted = 0.0;
            for j in 0..n {
                row[j] = if j == i {
                    0.0
                } else {
                    (-(dist[j] - d_min) * beta).exp()
                };
                sum += row[j];
                weighted += (dist[j] - d_min) * row[j];
            }
            let entropy = sum.ln() + beta * weighted / sum;
            row.iter_mut().for_each(|v| *v /= sum);
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() {
                    (beta + hi) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
    }
    let mut p = vec![0.0; n * n];
    let scale = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / scale).max(P_FLOOR);
            }
        }
    }
    p
}

fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let mut q = vec![0.0; n * n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dx = y[2 * i] - y[2 * j];
                let dy = y[2 * i + 1] - y[2 * j + 1];
                q[i * n + j] = 1.0 / (1.0 + dx * dx + dy * dy);
                total += q[i * n + j];
            }
        }
    }
    (0..n * n)
        .filter(|&ij| ij / n != ij % n)
        .map(|ij| p[ij] * (p[ij] / (q[ij] / total).max(P_FLOOR)).ln())
        .sum()
}

/// Writes `doc_id,x,y,cluster`, one row per projected document.
pub fn write_projection_csv<W: Write>(
    out: W,
    doc_ids: &[String],
    projection: &Projection,
    assignments: &[usize],
) -> Result<()> {
    if doc_ids.len() != projection.points.len() || assignments.len() != projection.points.len() {
        return Err(Error::contract(
            "projection, ids and assignments differ in length",
        ));
    }
    let mut writer = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Format(e.to_string());
    writer
        .write_record(["doc_id", "x", "y", "cluster"])
        .map_err(map)?;
    for ((id, p), c) in doc_ids.iter().zip(&projection.points).zip(assignments) {
        writer
            .write_record([
                id.clone(),
                p[0].to_string(),
                p[1].to_string(),
                c.to_string(),
            ])
            .map_err(map)?;
    }
    writer.flush().map_err(|e| Error::io("projection csv", e))
}
