use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a cluster-quality table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub groups: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator, 0 for one value).
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Summary of per-group values; quantiles interpolate linearly between order
/// statistics at rank `(n - 1) * p`.
pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::contract("cannot summarize an empty list"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::contract("cannot summarize non-finite values"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantile = |p: f64| {
        let rank = (n - 1) as f64 * p;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok(SummaryStats {
        groups: n,
        mean,
        std,
        min: sorted[0],
        q25: quantile(0.25),
        q50: quantile(0.5),
        q75: quantile(0.75),
        max: sorted[n - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_values() {
        let s = summarize(&[0.9, 1.0]).unwrap();
        assert_abs_diff_eq!(s.mean, 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(s.std, 0.070_710_678_118_654_77, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q25, 0.925, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q50, 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(s.q75, 0.975, epsilon = 1e-12);
        assert_eq!((s.min, s.max, s.groups), (0.9, 1.0, 2));
    }

    #[test]
    fn singleton() {
        let s = summarize(&[0.42]).unwrap();
        assert_eq!(s.std, 0.0);
        for v in [s.mean, s.min, s.q25, s.q50, s.q75, s.max] {
            assert_eq!(v, 0.42);
        }
    }

    #[test]
    fn empty_is_rejected() {
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn quantiles_are_ordered() {
        let s = summarize(&[5.0, -1.0, 3.0, 3.0, 10.0, 0.5]).unwrap();
        assert!(s.min <= s.q25 && s.q25 <= s.q50 && s.q50 <= s.q75 && s.q75 <= s.max);
        assert_eq!(s.q50, 3.0);
    }
}
