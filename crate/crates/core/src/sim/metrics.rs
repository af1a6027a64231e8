//! Q-error and percentile summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `max(y / yhat, yhat / y)` with both sides clamped to at least 1.
pub fn q_error(y: u64, yhat: u64) -> f64 {
    let y = y.max(1) as f64;
    let yhat = yhat.max(1) as f64;
    (y / yhat).max(yhat / y)
}

/// Nearest-rank percentile: the `ceil(p / 100 * n)`-th smallest value.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(rank(&v, p))
}

fn rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = (p.clamp(0.0, 100.0) / 100.0 * n as f64).ceil() as usize;
    sorted[k.clamp(1, n) - 1]
}

/// P50, P90 and P95 of a set of Q-errors; absent when the set is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p50: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p90: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p95: Option<f64>,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Percentiles::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Percentiles {
            count: v.len(),
            p50: Some(rank(&v, 50.0)),
            p90: Some(rank(&v, 90.0)),
            p95: Some(rank(&v, 95.0)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QErrorSummary {
    #[serde(flatten)]
    pub overall: Percentiles,
    pub by_join_count: BTreeMap<usize, Percentiles>,
    pub by_provenance: BTreeMap<String, Percentiles>,
}

impl QErrorSummary {
    /// Summarises `(q_error, join count, provenance)` triples.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = (f64, usize, &'a str)>) -> Self {
        let mut all = Vec::new();
        let mut joins: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut prov: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (q, j, p) in samples {
            all.push(q);
            joins.entry(j).or_default().push(q);
            prov.entry(p.to_string()).or_default().push(q);
        }
        QErrorSummary {
            overall: Percentiles::of(&all),
            by_join_count: joins.into_iter().map(|(k, v)| (k, Percentiles::of(&v))).collect(),
            by_provenance: prov.into_iter().map(|(k, v)| (k, Percentiles::of(&v))).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.overall.count
    }
}
