use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{summarize, SummaryStats};
use crate::clusterer::ClusterModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};

/// Cosine of the angle between `a` and `b`, clamped to `[-1, 1]`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "cosine of vectors with dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::contract("cosine of a zero vector is undefined"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Mean cosine over all unordered pairs of distinct members.
///
/// With `u_i` the unit-normalized members and `s = sum u_i`,
/// `sum_{i != j} u_i . u_j = |s|^2 - n`, so the mean over the `n(n-1)/2`
/// pairs is `(|s|^2 - n) / (n (n - 1))` and costs O(nD). A singleton group
/// scores 1.
pub fn group_pairwise_mean<R: AsRef<[f64]>>(group: &[R]) -> Result<f64> {
    let n = group.len();
    if n == 0 {
        return Err(Error::contract("pairwise mean of an empty group"));
    }
    let dim = group[0].as_ref().len();
    let mut sum = vec![0.0; dim];
    for (i, v) in group.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::contract("group members differ in dimension"));
        }
        let len = norm(v);
        if len == 0.0 {
            return Err(Error::ZeroVector { index: i });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x / len;
        }
    }
    if n == 1 {
        return Ok(1.0);
    }
    let n = n as f64;
    Ok(((dot(&sum, &sum) - n) / (n * (n - 1.0))).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub cluster: usize,
    pub size: usize,
    pub pairwise_mean: f64,
    pub centroid_mean: f64,
    /// The group has one member and its pairwise mean is the 1.0 convention.
    pub singleton: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSimilarityReport {
    pub per_group: Vec<GroupStats>,
    pub pairwise_summary: SummaryStats,
    pub centroid_summary: SummaryStats,
}

/// Per-group pairwise and member-to-centroid cosine means, summarized over
/// groups.
pub fn centroid_similarity_stats(
    model: &ClusterModel,
    vectors: &Matrix,
) -> Result<GroupSimilarityReport> {
    let k = model.k();
    if model.assignments.len() != vectors.rows() {
        return Err(Error::contract(format!(
            "{} assignments for {} vectors",
            model.assignments.len(),
            vectors.rows()
        )));
    }
    if vectors.cols() != model.centroids.cols() {
        return Err(Error::contract("vector and centroid dimensions differ"));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in model.assignments.iter().enumerate() {
        if a >= k {
            return Err(Error::contract(format!(
                "assignment {a} out of range for k = {k}"
            )));
        }
        members[a].push(i);
    }

    let per_group: Vec<GroupStats> = members
        .par_iter()
        .enumerate()
        .map(|(c, idx)| {
            if idx.is_empty() {
                return Err(Error::contract(format!("cluster {c} has no members")));
            }
            let centroid = model.centroids.row(c);
            if norm(centroid) == 0.0 {
                return Err(Error::contract(format!("centroid {c} is the zero vector")));
            }
            let rows: Vec<&[f64]> = idx.iter().map(|&i| vectors.row(i)).collect();
            let pairwise_mean = group_pairwise_mean(&rows).map_err(|e| match e {
                Error::ZeroVector { index } => Error::ZeroVector { index: idx[index] },
                other => other,
            })?;
            let centroid_sum = rows
                .iter()
                .map(|r| cosine(r, centroid))
                .sum::<Result<f64>>()?;
            Ok(GroupStats {
                cluster: c,
                size: idx.len(),
                pairwise_mean,
                centroid_mean: centroid_sum / idx.len() as f64,
                singleton: idx.len() == 1,
            })
        })
        .collect::<Result<_>>()?;

    let pairwise: Vec<f64> = per_group.iter().map(|g| g.pairwise_mean).collect();
    let centroid: Vec<f64> = per_group.iter().map(|g| g.centroid_mean).collect();
    Ok(GroupSimilarityReport {
        pairwise_summary: summarize(&pairwise)?,
        centroid_summary: summarize(&centroid)?,
        per_group,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pairwise,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupValue {
    pub cluster: usize,
    pub size: usize,
    pub value: f64,
    pub singleton: bool,
}

/// One metric's section of the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub summary: SummaryStats,
    pub per_group: Vec<GroupValue>,
}

impl GroupSimilarityReport {
    pub fn metric_reports(&self) -> [MetricReport; 2] {
        let section = |metric: Metric, summary: SummaryStats| MetricReport {
            metric,
            summary,
            per_group: self
                .per_group
                .iter()
                .map(|g| GroupValue {
                    cluster: g.cluster,
                    size: g.size,
                    value: match metric {
                        Metric::Pairwise => g.pairwise_mean,
                        Metric::Centroid => g.centroid_mean,
                    },
                    singleton: g.singleton,
                })
                .collect(),
        };
        [
            section(Metric::Pairwise, self.pairwise_summary),
            section(Metric::Centroid, self.centroid_summary),
        ]
    }

    pub fn summary(&self, metric: Metric) -> &SummaryStats {
        match metric {
            Metric::Pairwise => &self.pairwise_summary,
            Metric::Centroid => &self.centroid_summary,
        }
    }
}

pub const REPORT_CSV_HEADER: [&str; 9] = [
    "Transformer Model",
    "Groups",
    "Mean",
    "Std.",
    "Min.",
    "25%",
    "50%",
    "75%",
    "Max.",
];

/// Writes a results table: one header row and one row per `(label, stats)`.
pub fn write_report_csv<W: Write>(out: W, rows: &[(&str, &SummaryStats)]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Format(e.to_string());
    writer.write_record(REPORT_CSV_HEADER).map_err(map)?;
    for (label, s) in rows {
        writer
            .write_record([
                label.to_string(),
                s.groups.to_string(),
                s.mean.to_string(),
                s.std.to_string(),
                s.min.to_string(),
                s.q25.to_string(),
                s.q50.to_string(),
                s.q75.to_string(),
                s.max.to_string(),
            ])
            .map_err(map)?;
    }
    writer.flush().map_err(|e| Error::io("report csv", e))
}
