//! Streaming aggregation of per-cell Monte-Carlo samples.

use crate::error::Error;
use crate::Result;

/// Aggregated statistics for one sweep cell (a layer index or a width).
#[derive(Debug, Clone, PartialEq)]
pub struct StatSummary {
    /// Cell key: layer index k or width m.
    pub key: u64,
    pub mean: f64,
    /// Sample standard deviation (0 for a single sample).
    pub std: f64,
    pub median: f64,
    pub count: usize,
}

/// Welford single-pass mean/variance accumulator.
#[derive(Debug, Clone, Default)]
struct Welford {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    fn std(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// Mean, sample std, and median of one cell's samples; empty cells error.
pub fn summarize(key: u64, values: &[f64]) -> Result<StatSummary> {
    if values.is_empty() {
        return Err(Error::invalid(format!("summarize: cell {key} has no samples")));
    }
    let mut acc = Welford::default();
    for &v in values {
        acc.push(v);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN samples"));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Ok(StatSummary {
        key,
        mean: acc.mean,
        std: acc.std(),
        median,
        count: values.len(),
    })
}
