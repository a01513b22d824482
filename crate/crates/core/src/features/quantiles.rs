use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Percentile with linear interpolation between closest ranks
/// (`(n - 1) * q` positioning). `sorted` must be ascending and non-empty.
pub fn linear_percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Four ascending word-distance thresholds at the 20/40/60/80th percentiles.
/// A distance `d` maps to the first bin `k` with `d <= bounds[k]`, else bin 4;
/// first mentions always map to bin 4.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuantileBounds {
    bounds: Option<[f64; 4]>,
}

impl QuantileBounds {
    pub fn fit(distances: &[f64]) -> Result<Self> {
        if distances.is_empty() {
            return Err(Error::Invalid(
                "cannot fit word-distance quantiles: no antecedent-bearing mentions".into(),
            ));
        }
        let mut sorted = distances.to_vec();
        sorted.sort_by(f64::total_cmp);
        let bounds = [0.2, 0.4, 0.6, 0.8].map(|q| linear_percentile(&sorted, q));
        Ok(QuantileBounds { bounds: Some(bounds) })
    }

    pub fn from_bounds(bounds: [f64; 4]) -> Self {
        QuantileBounds { bounds: Some(bounds) }
    }

    pub fn bounds(&self) -> Option<[f64; 4]> {
        self.bounds
    }

    pub fn bin(&self, distance: Option<usize>) -> Result<u8> {
        let bounds = self
            .bounds
            .ok_or_else(|| Error::Invalid("word-distance quantile bounds not fitted".into()))?;
        Ok(match distance {
            None => 4,
            Some(d) => {
                let d = d as f64;
                bounds.iter().position(|&b| d <= b).unwrap_or(4) as u8
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force percentile: walk the sorted list to the fractional rank.
    fn oracle_percentile(values: &[f64], q: f64) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = q * (v.len() as f64 - 1.0);
        let mut i = 0;
        while (i + 1) as f64 <= rank {
            i += 1;
        }
        if i + 1 >= v.len() {
            return v[v.len() - 1];
        }
        v[i] + (rank - i as f64) * (v[i + 1] - v[i])
    }

    #[test]
    fn one_to_twenty_bounds_and_bins() {
        let d: Vec<f64> = (1..=20).map(f64::from).collect();
        let fitted = QuantileBounds::fit(&d).unwrap().bounds().unwrap();
        let expected = [0.2, 0.4, 0.6, 0.8].map(|q| oracle_percentile(&d, q));
        for (a, b) in fitted.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        // Frozen oracle values: 4.8, 8.6, 12.4, 16.2.
        assert!((expected[0] - 4.8).abs() < 1e-12);
        assert!((expected[3] - 16.2).abs() < 1e-12);
        let q = QuantileBounds::from_bounds(fitted);
        assert_eq!(q.bin(Some(10)).unwrap(), 2);
        assert_eq!(q.bin(Some(1)).unwrap(), 0);
        assert_eq!(q.bin(Some(20)).unwrap(), 4);
        assert_eq!(q.bin(None).unwrap(), 4);
    }

    #[test]
    fn empty_fit_fails() {
        assert!(QuantileBounds::fit(&[]).is_err());
    }
}
