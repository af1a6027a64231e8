//! Kernels and per-pattern regressors.

mod gbdt;
mod kernel;
mod linalg;
mod rbf;
mod ridge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gbdt::{fit_gbdt, predict_gbdt, GbdtModel, GbdtParams, Tree, TreeNode};
pub use kernel::{composite_kernel, gaussian_kernel, sq_distance, KernelParams};
pub use linalg::solve_spd;
pub use rbf::predict_rbf_oneshot;
pub use ridge::{fit_lwlr, fit_ridge_weighted, RidgeModel};

/// Which regressor a level uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Lwlr,
    Rbf,
    #[default]
    Gbdt,
}

/// `local` refits around every query point with kernel weights; `cached`
/// keeps one model per bucket and refits it periodically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    Local,
    #[default]
    Cached,
}

/// History of feature vectors and log-cardinality targets, stored row-major.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    raw: Vec<u64>,
}

impl TrainingSet {
    pub fn new(dim: usize) -> Self {
        TrainingSet {
            dim,
            ..Default::default()
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], raw: &[u64]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut set = TrainingSet::new(dim);
        for (x, &r) in rows.iter().zip(raw) {
            set.push(x, r)?;
        }
        Ok(set)
    }

    /// Builds a set with arbitrary (already transformed) targets.
    pub fn from_targets(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut set = TrainingSet::new(dim);
        for (x, &t) in rows.iter().zip(y) {
            set.push_target(x, t, t.exp_m1().max(0.0).round() as u64)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: &[f64], raw: u64) -> Result<()> {
        self.push_target(x, log_target(raw), raw)
    }

    fn push_target(&mut self, x: &[f64], y: f64, raw: u64) -> Result<()> {
        if self.is_empty() && self.x.is_empty() && self.dim == 0 {
            self.dim = x.len();
        }
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        self.x.extend_from_slice(x);
        self.y.push(y);
        self.raw.push(raw);
        Ok(())
    }

    /// Drops the oldest row.
    pub fn pop_front(&mut self) {
        if !self.y.is_empty() {
            self.x.drain(..self.dim);
            self.y.remove(0);
            self.raw.remove(0);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn raw_targets(&self) -> &[u64] {
        &self.raw
    }

    /// A copy with every row mapped through `f`.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> TrainingSet {
        let mut out = TrainingSet::new(self.dim);
        for i in 0..self.len() {
            out.x.extend(f(self.row(i)));
        }
        out.y = self.y.clone();
        out.raw = self.raw.clone();
        out
    }
}

pub fn log_target(raw: u64) -> f64 {
    (raw as f64).ln_1p()
}

/// Inverse of the log target, rounded and clamped to `[0, max]`.
pub fn to_cardinality(pred: f64, max: f64) -> u64 {
    if pred.is_nan() {
        return 0;
    }
    let v = pred.exp_m1().round().max(0.0);
    let cap = max.max(0.0);
    if v >= cap {
        cap.min(u64::MAX as f64) as u64
    } else {
        v as u64
    }
}

/// Running per-feature mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Standardizer {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Standardizer {
    pub fn new(dim: usize) -> Self {
        Standardizer {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn fit(set: &TrainingSet) -> Self {
        let mut s = Standardizer::new(set.dim());
        for r in set.rows() {
            s.update(r);
        }
        s
    }

    pub fn update(&mut self, x: &[f64]) {
        if self.mean.len() != x.len() {
            *self = Standardizer::new(x.len());
        }
        self.count += 1;
        let n = self.count as f64;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|m| (m / n).max(0.0).sqrt()).collect()
    }

    /// Standardized copy of `x`; constant features are passed through.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let std = self.std();
        x.iter()
            .enumerate()
            .map(|(i, &v)| match (self.mean.get(i), std.get(i)) {
                (Some(m), Some(&s)) if s > 1e-12 => (v - m) / s,
                _ => v,
            })
            .collect()
    }
}

/// Pairs beyond which the median distance is taken over a row subsample.
const SIGMA_MAX_PAIRS: usize = 4096;

/// Median pairwise Euclidean distance, floored at `1e-6`; `1.0` for fewer
/// than two rows.
pub fn median_sigma(set: &TrainingSet) -> f64 {
    let n = set.len();
    if n < 2 {
        return 1.0;
    }
    let mut m = n;
    while m * (m - 1) / 2 > SIGMA_MAX_PAIRS {
        m -= 1;
    }
    let idx: Vec<usize> = (0..m).map(|k| k * (n - 1) / (m - 1).max(1)).collect();
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in a + 1..m {
            d.push(sq_distance(set.row(idx[a]), set.row(idx[b])).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let med = if d.len() % 2 == 1 {
        d[mid]
    } else {
        0.5 * (d[mid - 1] + d[mid])
    };
    med.max(1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_roundtrip() {
        assert_eq!(to_cardinality(0.0, 1e9), 0);
        assert_eq!(to_cardinality(100f64.ln(), 1e9), 99);
        assert_eq!(to_cardinality(log_target(12345), 1e9), 12345);
        assert_eq!(to_cardinality(80.0, 5000.0), 5000);
        assert_eq!(to_cardinality(-3.0, 10.0), 0);
        assert_eq!(to_cardinality(f64::NAN, 10.0), 0);
    }

    #[test]
    fn standardizer_matches_batch_moments() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![8.0, 5.0]];
        let set = TrainingSet::from_rows(&rows, &[1, 2, 3]).unwrap();
        let s = Standardizer::fit(&set);
        assert!((s.mean()[0] - 4.0).abs() < 1e-12);
        let var = ((9.0 + 1.0 + 16.0) / 3.0f64).sqrt();
        assert!((s.std()[0] - var).abs() < 1e-12);
        let z = s.apply(&[4.0, 7.0]);
        assert_eq!(z[0], 0.0);
        // Constant column passes through.
        assert_eq!(z[1], 7.0);
    }

    #[test]
    fn training_set_rejects_dim_change() {
        let mut set = TrainingSet::new(2);
        set.push(&[1.0, 2.0], 3).unwrap();
        assert!(matches!(
            set.push(&[1.0], 3),
            Err(Error::DimMismatch { expected: 2, actual: 1 })
        ));
        assert_eq!(set.len(), 1);
        assert_eq!(set.targets()[0], 4f64.ln());
    }

    #[test]
    fn sigma_defaults_and_median() {
        let one = TrainingSet::from_rows(&[vec![0.0]], &[1]).unwrap();
        assert_eq!(median_sigma(&one), 1.0);
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 3.0].iter().map(|&v| vec![v]).collect();
        let set = TrainingSet::from_rows(&rows, &[0, 0, 0]).unwrap();
        // distances 1, 3, 2 -> median 2
        assert_eq!(median_sigma(&set), 2.0);
        let same = TrainingSet::from_rows(&[vec![1.0], vec![1.0]], &[0, 0]).unwrap();
        assert_eq!(median_sigma(&same), 1e-6);
    }

    #[test]
    fn sigma_subsamples_large_sets() {
        let rows: Vec<Vec<f64>> = (0..1000).map(|v| vec![v as f64]).collect();
        let set = TrainingSet::from_rows(&rows, &vec![0; 1000]).unwrap();
        let s = median_sigma(&set);
        // Uniform line: median |a-b| is about 29% of the span.
        assert!(s > 200.0 && s < 400.0, "{s}");
    }
}
