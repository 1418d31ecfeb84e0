use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kmeans_fit, ClusterModel, KMeansConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// The 31 candidate cluster counts `2..=32`.
pub fn default_candidates() -> Vec<usize> {
    (2..=32).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowResult {
    /// `(k, inertia)` in candidate order.
    pub candidates: Vec<(usize, f64)>,
    pub chosen_k: usize,
    /// Perpendicular distance of each normalized point below the chord from
    /// the first to the last point; negative above it.
    pub knee_scores: Vec<f64>,
    /// Candidates whose inertia exceeds the previous candidate's by more
    /// than 1e-9 (relative).
    pub violations: Vec<usize>,
}

/// Scores points after scaling `k` and inertia to the unit square and picks
/// the one farthest below the chord. Ties go to the smaller `k`.
pub fn knee_from_curve(curve: &[(usize, f64)]) -> Result<(usize, Vec<f64>)> {
    if curve.len() < 3 {
        return Err(Error::contract(format!(
            "elbow selection needs at least 3 candidates, got {}",
            curve.len()
        )));
    }
    if curve.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::contract(
            "candidate k values must be strictly increasing",
        ));
    }
    let (k0, k1) = (curve[0].0 as f64, curve[curve.len() - 1].0 as f64);
    let lo = curve.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    let hi = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let points: Vec<(f64, f64)> = curve
        .iter()
        .map(|&(k, i)| {
            let x = (k as f64 - k0) / (k1 - k0);
            let y = if span > 0.0 { (i - lo) / span } else { 0.0 };
            (x, y)
        })
        .collect();
    let (y0, y1) = (points[0].1, points[points.len() - 1].1);
    let slope = y1 - y0;
    let len = (1.0 + slope * slope).sqrt();
    let scores: Vec<f64> = points
        .iter()
        .map(|&(x, y)| (y0 + slope * x - y) / len)
        .collect();

    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let idx = scores
        .iter()
        .position(|&s| s >= best - 1e-12)
        .expect("scores are non-empty");
    Ok((curve[idx].0, scores))
}

/// Fits k-means for every candidate and picks K at the knee of the inertia
/// curve. Also returns the model fitted at the chosen K.
pub fn select_k_elbow(
    vectors: &Matrix,
    k_set: &[usize],
    config: &KMeansConfig,
) -> Result<(ElbowResult, ClusterModel)> {
    if k_set.len() < 3 {
        return Err(Error::contract(format!(
            "elbow selection needs at least 3 candidates, got {}",
            k_set.len()
        )));
    }
    if k_set.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::contract(
            "candidate k values must be strictly increasing",
        ));
    }
    if let Some(&k) = k_set.iter().find(|&&k| k > vectors.rows() || k == 0) {
        return Err(Error::contract(format!(
            "candidate k = {k} is not in 1..={}",
            vectors.rows()
        )));
    }
    let models: Vec<ClusterModel> = k_set
        .par_iter()
        .map(|&k| kmeans_fit(vectors, &config.with_k(k)))
        .collect::<Result<_>>()?;
    let candidates: Vec<(usize, f64)> = k_set
        .iter()
        .zip(&models)
        .map(|(&k, m)| (k, m.inertia))
        .collect();
    let violations = candidates
        .windows(2)
        .filter(|w| w[1].1 > w[0].1 + 1e-9 * w[0].1.abs().max(1.0))
        .map(|w| w[1].0)
        .collect();
    let (chosen_k, knee_scores) = knee_from_curve(&candidates)?;
    let chosen = k_set
        .iter()
        .position(|&k| k == chosen_k)
        .expect("chosen from k_set");
    let model = models
        .into_iter()
        .nth(chosen)
        .expect("one model per candidate");
    Ok((
        ElbowResult {
            candidates,
            chosen_k,
            knee_scores,
            violations,
        },
        model,
    ))
}
