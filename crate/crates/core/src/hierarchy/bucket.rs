use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LevelConfig, ModelParams};
use crate::canonhash::PatternHash;
use crate::error::Result;
use crate::learners::{
    fit_gbdt, fit_lwlr, fit_ridge_weighted, median_sigma, predict_rbf_oneshot, FitMode, GbdtModel, KernelParams,
    LearnerKind, RidgeModel, Standardizer, TrainingSet,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedModel {
    Gbdt(GbdtModel),
    Ridge(RidgeModel),
    /// Kernel-weighted mean of the stored targets.
    Rbf,
}

/// Everything derived from a bucket at refit time.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedModel {
    pub standardizer: Standardizer,
    pub sigma: f64,
    /// Standardized copy of the rows the model was fit on.
    pub rows: TrainingSet,
    pub model: FittedModel,
    /// Set when the configured learner failed and the RBF mean is used.
    pub fallback: bool,
}

impl CachedModel {
    pub fn fit(set: &TrainingSet, level: &LevelConfig, params: &ModelParams) -> CachedModel {
        let standardizer = Standardizer::fit(set);
        let rows = set.map_rows(|x| standardizer.apply(x));
        let sigma = params.sigma.unwrap_or_else(|| median_sigma(&rows));
        let mut cm = CachedModel {
            standardizer,
            sigma,
            rows,
            model: FittedModel::Rbf,
            fallback: false,
        };
        if set.len() < 2 {
            cm.fallback = level.learner != LearnerKind::Rbf;
            return cm;
        }
        if level.fit_mode == FitMode::Local {
            return cm;
        }
        let fitted = match level.learner {
            LearnerKind::Rbf => Ok(FittedModel::Rbf),
            LearnerKind::Gbdt => fit_gbdt(&cm.rows, &params.gbdt, None).map(FittedModel::Gbdt),
            LearnerKind::Lwlr => {
                let center = cm.standardizer.apply(cm.standardizer.mean());
                let w = vec![1.0; cm.rows.len()];
                fit_ridge_weighted(&cm.rows, &w, &center, params.l2).map(FittedModel::Ridge)
            }
        };
        match fitted {
            Ok(m) => cm.model = m,
            Err(_) => cm.fallback = true,
        }
        cm
    }

    /// Log-cardinality prediction for the raw feature vector `x`.
    pub fn predict(&self, x: &[f64], level: &LevelConfig, params: &ModelParams) -> f64 {
        let z = self.standardizer.apply(x);
        let kp = KernelParams { sigma: self.sigma };
        let rbf = || predict_rbf_oneshot(&self.rows, &z, &kp).unwrap_or(0.0);
        if self.fallback {
            return rbf();
        }
        let local = level.fit_mode == FitMode::Local && self.rows.len() >= 2;
        let out: Result<f64> = match (&self.model, local, level.learner) {
            (_, true, LearnerKind::Lwlr) => fit_lwlr(&self.rows, &z, &kp, params.l2).map(|m| m.predict(&z)),
            (_, true, LearnerKind::Gbdt) => {
                let w: Vec<f64> = self
                    .rows
                    .rows()
                    .map(|r| (-crate::learners::sq_distance(r, &z) / (kp.sigma * kp.sigma)).exp())
                    .collect();
                fit_gbdt(&self.rows, &params.gbdt, Some(&w)).map(|m| m.predict(&z))
            }
            (FittedModel::Gbdt(m), false, _) => Ok(m.predict(&z)),
            (FittedModel::Ridge(m), false, _) => Ok(m.predict(&z)),
            _ => Ok(rbf()),
        };
        match out {
            Ok(v) if v.is_finite() => v,
            _ => rbf(),
        }
    }
}

/// History of one pattern at one level.
#[derive(Debug, Clone)]
pub struct PatternBucket {
    pub pattern: PatternHash,
    pub rows: TrainingSet,
    pub stats: Standardizer,
    pub rows_since_refit: usize,
    /// Row count when the cached model was last refit.
    pub last_refit: usize,
    /// Estimates answered from this bucket.
    pub served: u64,
    cache: Option<Arc<CachedModel>>,
    #[cfg(debug_assertions)]
    fingerprints: Vec<u16>,
}

impl PatternBucket {
    pub fn new(pattern: PatternHash, dim: usize) -> Self {
        PatternBucket {
            pattern,
            rows: TrainingSet::new(dim),
            stats: Standardizer::new(dim),
            rows_since_refit: 0,
            last_refit: 0,
            served: 0,
            cache: None,
            #[cfg(debug_assertions)]
            fingerprints: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, x: &[f64], truth: u64, source: PatternHash, cap: Option<usize>) -> Result<()> {
        self.rows.push(x, truth)?;
        self.stats.update(x);
        self.rows_since_refit += 1;
        #[cfg(debug_assertions)]
        self.fingerprints.push(source.fingerprint());
        #[cfg(not(debug_assertions))]
        let _ = source;
        if let Some(cap) = cap {
            if self.rows.len() > cap.max(1) {
                self.rows.pop_front();
                #[cfg(debug_assertions)]
                self.fingerprints.remove(0);
                self.stats = Standardizer::fit(&self.rows);
            }
        }
        Ok(())
    }

    /// Whether every stored row came from a graph hashing to this bucket.
    /// Always true in release builds, where fingerprints are not kept.
    pub fn partition_consistent(&self) -> bool {
        #[cfg(debug_assertions)]
        {
            let f = self.pattern.fingerprint();
            self.fingerprints.len() == self.rows.len() && self.fingerprints.iter().all(|&g| g == f)
        }
        #[cfg(not(debug_assertions))]
        true
    }

    pub fn cached(&self) -> Option<&Arc<CachedModel>> {
        self.cache.as_ref()
    }

    pub fn needs_refit(&self, refit_every: usize) -> bool {
        self.cache.is_none() || self.rows_since_refit >= refit_every.max(1)
    }

    /// Rebuilds the cached model and resets the refit counter.
    pub fn refit(&mut self, level: &LevelConfig, params: &ModelParams) -> Arc<CachedModel> {
        let cm = Arc::new(CachedModel::fit(&self.rows, level, params));
        self.cache = Some(cm.clone());
        self.rows_since_refit = 0;
        self.last_refit = self.rows.len();
        cm
    }
}
