//! The online estimator store: pattern-hash buckets at three levels of
//! specificity, with fallback to a bias-corrected heuristic.

mod bias;
mod bucket;
mod snapshot;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::HeuristicEstimator;
use crate::canonhash::{canonicalize, PatternFeatures, PatternHash};
use crate::error::{Error, Result};
use crate::featurize::{default_learn_features, extract, FeatureExtractorSpec, FeatureVector};
use crate::learners::{composite_kernel, to_cardinality, FitMode, GbdtParams, KernelParams, LearnerKind};
use crate::querygraph::{AttrKey, QueryDag};
use crate::schema::Schema;

pub use bias::{bias_adjust, BiasEntry, BiasSource, BiasTable, OnlineBias};
pub use bucket::{CachedModel, FittedModel, PatternBucket};
pub use snapshot::{BucketSnapshot, StoreSnapshot, SNAPSHOT_VERSION};

/// One level of the hierarchy: pattern features, learning features and the
/// minimum bucket size at which the level is trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelConfig {
    pub level_id: u8,
    pub pattern_feats: PatternFeatures,
    pub learn_feats: Vec<FeatureExtractorSpec>,
    pub beta: usize,
    #[serde(default)]
    pub fit_mode: FitMode,
    #[serde(default)]
    pub learner: LearnerKind,
}

impl LevelConfig {
    /// Default configuration of level 1, 2 or 3.
    pub fn default_level(level: u8) -> Self {
        let mut keys = vec![AttrKey::TABLE_NAME, AttrKey::COLUMN_TYPE];
        if level >= 2 {
            keys.push(AttrKey::COLUMN_NAME);
        }
        if level >= 3 {
            keys.push(AttrKey::OP_CODE);
        }
        let beta = match level {
            1 => 100,
            2 => 50,
            _ => 10,
        };
        LevelConfig {
            level_id: level,
            pattern_feats: PatternFeatures::new(keys).expect("registered keys"),
            learn_feats: default_learn_features(level),
            beta,
            fit_mode: FitMode::Cached,
            learner: LearnerKind::Gbdt,
        }
    }

    fn learn_keys(&self) -> Vec<AttrKey> {
        let mut keys: Vec<AttrKey> = self.learn_feats.iter().map(|f| f.key).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Canonical hash and feature vector of `dag` at this level.
    pub fn featurize(&self, dag: &QueryDag, schema: Option<&Schema>) -> Result<FeatureVector> {
        let canon = canonicalize(dag, &self.pattern_feats, &self.learn_keys());
        extract(dag, &canon, &self.learn_feats, schema)
    }
}

/// Kernel between two graphs at one level: zero unless their pattern hashes
/// agree.
pub fn level_kernel(
    g: &QueryDag,
    g2: &QueryDag,
    level: &LevelConfig,
    schema: Option<&Schema>,
    params: &KernelParams,
) -> Result<f64> {
    let a = level.featurize(g, schema)?;
    let b = level.featurize(g2, schema)?;
    Ok(composite_kernel(&a, &b, params))
}

/// Learner hyperparameters shared by all levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub l2: f64,
    pub gbdt: GbdtParams,
    /// Fixed kernel width; the per-bucket median distance when absent.
    pub sigma: Option<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            l2: 1e-3,
            gbdt: GbdtParams::default(),
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoreConfig {
    /// Levels ordered from most general (1) to most specific (3).
    pub levels: Vec<LevelConfig>,
    pub model: ModelParams,
    /// New rows after which a cached model is refit.
    pub refit_every: usize,
    pub bias: BiasTable,
    pub seed: u64,
    /// Optional ring-buffer cap on rows per bucket.
    pub max_bucket_rows: Option<usize>,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            levels: (1..=3).map(LevelConfig::default_level).collect(),
            model: ModelParams::default(),
            refit_every: 8,
            bias: BiasTable::default(),
            seed: 0,
            max_bucket_rows: None,
        }
    }
}

impl StoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.len() != 3 {
            return Err(Error::Config(format!("expected 3 levels, found {}", self.levels.len())));
        }
        for (i, l) in self.levels.iter().enumerate() {
            if usize::from(l.level_id) != i + 1 {
                return Err(Error::Config(format!("level {} listed in position {}", l.level_id, i + 1)));
            }
            if l.beta == 0 {
                return Err(Error::Config(format!("level {} has beta 0", l.level_id)));
            }
            for f in &l.learn_feats {
                FeatureExtractorSpec::new(f.key, f.extractor)?;
            }
        }
        for w in self.levels.windows(2) {
            if !w[0].pattern_feats.is_subset(&w[1].pattern_feats) {
                return Err(Error::Config(format!(
                    "pattern features of level {} must include those of level {}",
                    w[1].level_id, w[0].level_id
                )));
            }
        }
        if self.refit_every == 0 {
            return Err(Error::Config("refit_every must be positive".into()));
        }
        if !(self.model.l2 >= 0.0) {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        if let Some(s) = self.model.sigma {
            KernelParams::new(s)?;
        }
        let lr = self.model.gbdt.learning_rate;
        if !(lr > 0.0 && lr <= 1.0) {
            return Err(Error::Config(format!("learning rate must lie in (0, 1], got {lr}")));
        }
        for e in self.bias.configured.values() {
            if !(0.0..=1.0).contains(&e.p) || !(e.m >= 1.0) || !e.m.is_finite() {
                return Err(Error::Config(format!("invalid bias entry {e:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Level3,
    Level2,
    Level1,
    Heuristic,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Level3,
        Provenance::Level2,
        Provenance::Level1,
        Provenance::Heuristic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Level3 => "level3",
            Provenance::Level2 => "level2",
            Provenance::Level1 => "level1",
            Provenance::Heuristic => "heuristic",
        }
    }

    fn from_level(k: usize) -> Self {
        match k {
            3 => Provenance::Level3,
            2 => Provenance::Level2,
            _ => Provenance::Level1,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    pub cardinality: u64,
    pub provenance: Provenance,
    /// Size of the bucket that answered, or of the level-3 bucket when the
    /// heuristic answered.
    pub bucket_size: usize,
    /// Bucket sizes at levels 1, 2, 3.
    pub level_sizes: [usize; 3],
    pub latency: Duration,
}

/// Per-level hashes and feature vectors of one graph. Holds no reference to
/// the graph itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Analyzed {
    /// Indexed by level - 1.
    pub features: Vec<FeatureVector>,
    pub n_join: usize,
    /// Upper bound on the cardinality: the product of joined table sizes.
    pub max_cardinality: f64,
}

impl Analyzed {
    pub fn hash(&self, level: u8) -> PatternHash {
        self.features[usize::from(level) - 1].pattern
    }
}

type BucketRef = Arc<RwLock<PatternBucket>>;

/// Pattern-hash keyed histories and models for all levels.
///
/// Estimates take read locks; observations lock only the buckets they
/// append to. The store is `Send + Sync`.
pub struct EstimatorStore {
    config: StoreConfig,
    schema: Option<Arc<Schema>>,
    levels: Vec<RwLock<HashMap<PatternHash, BucketRef>>>,
    bias: Mutex<BiasTable>,
    rng: Mutex<ChaCha8Rng>,
}

impl EstimatorStore {
    pub fn new(config: StoreConfig, schema: Option<Schema>) -> Result<Self> {
        config.validate()?;
        Ok(EstimatorStore {
            levels: (0..3).map(|_| RwLock::new(HashMap::new())).collect(),
            bias: Mutex::new(config.bias.clone()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(config.seed)),
            schema: schema.map(Arc::new),
            config,
        })
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn schema(&self) -> Option<&Schema> {
        self.schema.as_deref()
    }

    pub fn bias_table(&self) -> BiasTable {
        self.bias.lock().unwrap().clone()
    }

    pub fn analyze(&self, dag: &QueryDag) -> Result<Analyzed> {
        let schema = self.schema();
        let features = self
            .config
            .levels
            .iter()
            .map(|l| l.featurize(dag, schema))
            .collect::<Result<Vec<_>>>()?;
        let mut max_cardinality = 1.0f64;
        for t in dag.alias_tables() {
            match schema.and_then(|s| s.table_size(t)) {
                Some(n) => max_cardinality *= n as f64,
                None => max_cardinality = f64::INFINITY,
            }
        }
        Ok(Analyzed {
            features,
            n_join: dag.join_count(),
            max_cardinality,
        })
    }

    fn bucket(&self, level: usize, h: &PatternHash) -> Option<BucketRef> {
        self.levels[level].read().unwrap().get(h).cloned()
    }

    /// Number of rows stored for `h` at `level` (1-based).
    pub fn bucket_len(&self, level: u8, h: &PatternHash) -> usize {
        self.bucket(usize::from(level) - 1, h)
            .map_or(0, |b| b.read().unwrap().len())
    }

    pub fn bucket_count(&self, level: u8) -> usize {
        self.levels[usize::from(level) - 1].read().unwrap().len()
    }

    /// Total rows over all buckets and levels.
    pub fn total_rows(&self) -> usize {
        self.levels
            .iter()
            .map(|m| m.read().unwrap().values().map(|b| b.read().unwrap().len()).sum::<usize>())
            .sum()
    }

    /// Estimates with the most specific trusted level, falling back to the
    /// bias-adjusted `heuristic_raw`.
    pub fn estimate_analyzed(&self, a: &Analyzed, heuristic_raw: u64) -> EstimateResult {
        let start = Instant::now();
        let buckets: Vec<Option<BucketRef>> = (0..3).map(|k| self.bucket(k, &a.features[k].pattern)).collect();
        let mut sizes = [0usize; 3];
        for (k, b) in buckets.iter().enumerate() {
            sizes[k] = b.as_ref().map_or(0, |b| b.read().unwrap().len());
        }
        for k in (0..3).rev() {
            let level = &self.config.levels[k];
            if sizes[k] < level.beta {
                continue;
            }
            let b = buckets[k].as_ref().unwrap();
            let model = {
                let guard = b.read().unwrap();
                if guard.needs_refit(self.config.refit_every) {
                    None
                } else {
                    guard.cached().cloned()
                }
            };
            let model = match model {
                Some(m) => m,
                None => {
                    let mut w = b.write().unwrap();
                    if w.needs_refit(self.config.refit_every) {
                        w.refit(level, &self.config.model)
                    } else {
                        w.cached().cloned().unwrap()
                    }
                }
            };
            let pred = model.predict(&a.features[k].values, level, &self.config.model);
            b.write().unwrap().served += 1;
            return EstimateResult {
                cardinality: to_cardinality(pred, a.max_cardinality),
                provenance: Provenance::from_level(k + 1),
                bucket_size: sizes[k],
                level_sizes: sizes,
                latency: start.elapsed(),
            };
        }
        let u: f64 = self.rng.lock().unwrap().gen();
        let adjusted = {
            let bias = self.bias.lock().unwrap();
            bias_adjust(heuristic_raw as f64, a.n_join, &bias, u)
        };
        EstimateResult {
            cardinality: adjusted.round().clamp(1.0, a.max_cardinality.max(1.0)).min(u64::MAX as f64) as u64,
            provenance: Provenance::Heuristic,
            bucket_size: sizes[2],
            level_sizes: sizes,
            latency: start.elapsed(),
        }
    }

    /// Appends the observed cardinality to the graph's bucket at every level.
    pub fn observe_analyzed(&self, a: &Analyzed, truth: u64, heuristic_raw: Option<u64>) -> Result<()> {
        for (k, x) in a.features.iter().enumerate() {
            let b = match self.bucket(k, &x.pattern) {
                Some(b) => b,
                None => self.levels[k]
                    .write()
                    .unwrap()
                    .entry(x.pattern)
                    .or_insert_with(|| Arc::new(RwLock::new(PatternBucket::new(x.pattern, x.dim()))))
                    .clone(),
            };
            b.write()
                .unwrap()
                .push(&x.values, truth, x.pattern, self.config.max_bucket_rows)?;
        }
        if let Some(h) = heuristic_raw {
            self.bias.lock().unwrap().record(a.n_join, h, truth);
        }
        Ok(())
    }

    pub fn estimate(&self, dag: &QueryDag, heuristic: &dyn HeuristicEstimator) -> Result<EstimateResult> {
        let a = self.analyze(dag)?;
        let raw = heuristic.estimate(dag)?;
        Ok(self.estimate_analyzed(&a, raw))
    }

    pub fn observe(&self, dag: &QueryDag, truth: u64, heuristic: Option<&dyn HeuristicEstimator>) -> Result<()> {
        let a = self.analyze(dag)?;
        let raw = heuristic.map(|h| h.estimate(dag)).transpose()?;
        self.observe_analyzed(&a, truth, raw)
    }

    /// Whether every bucket only holds rows hashed to its key.
    pub fn partition_consistent(&self) -> bool {
        self.levels.iter().all(|m| {
            m.read()
                .unwrap()
                .values()
                .all(|b| b.read().unwrap().partition_consistent())
        })
    }

    /// Writes one CSV line per bucket: level, hash, row count, rows at last
    /// refit, estimates served.
    pub fn debug_dump(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["level", "pattern_hash", "count", "last_refit", "served"])?;
        for (k, m) in self.levels.iter().enumerate() {
            let map = m.read().unwrap();
            let mut keys: Vec<&PatternHash> = map.keys().collect();
            keys.sort();
            for h in keys {
                let b = map[h].read().unwrap();
                w.write_record([
                    (k + 1).to_string(),
                    h.to_hex(),
                    b.len().to_string(),
                    b.last_refit.to_string(),
                    b.served.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
