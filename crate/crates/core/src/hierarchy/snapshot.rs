use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BiasTable, EstimatorStore, PatternBucket, StoreConfig};
use crate::canonhash::PatternHash;
use crate::error::{Error, Result};
use crate::schema::Schema;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSnapshot {
    pub level: u8,
    pub pattern: PatternHash,
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<u64>,
}

/// Serializable store contents. Cached models are rebuilt on demand after a
/// restore, and the bias RNG restarts from the configured seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSnapshot {
    pub version: u32,
    pub config: StoreConfig,
    pub bias: BiasTable,
    pub buckets: Vec<BucketSnapshot>,
}

impl StoreSnapshot {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let snap: StoreSnapshot = serde_json::from_str(&text)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!(
                "snapshot version {} is not supported (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        Ok(snap)
    }
}

impl EstimatorStore {
    pub fn snapshot(&self) -> StoreSnapshot {
        let mut buckets = Vec::new();
        for (k, m) in self.levels.iter().enumerate() {
            let map = m.read().unwrap();
            let mut keys: Vec<&PatternHash> = map.keys().collect();
            keys.sort();
            for h in keys {
                let b = map[h].read().unwrap();
                buckets.push(BucketSnapshot {
                    level: (k + 1) as u8,
                    pattern: *h,
                    dim: b.rows.dim(),
                    rows: b.rows.rows().map(<[f64]>::to_vec).collect(),
                    targets: b.rows.raw_targets().to_vec(),
                });
            }
        }
        StoreSnapshot {
            version: SNAPSHOT_VERSION,
            config: self.config.clone(),
            bias: self.bias_table(),
            buckets,
        }
    }

    pub fn restore(snap: &StoreSnapshot, schema: Option<Schema>) -> Result<Self> {
        snap.config.validate()?;
        let mut levels: Vec<HashMap<PatternHash, Arc<RwLock<PatternBucket>>>> = vec![HashMap::new(); 3];
        for b in &snap.buckets {
            if !(1..=3).contains(&b.level) {
                return Err(Error::Config(format!("bucket at unknown level {}", b.level)));
            }
            let mut bucket = PatternBucket::new(b.pattern, b.dim);
            for (x, &y) in b.rows.iter().zip(&b.targets) {
                bucket.push(x, y, b.pattern, None)?;
            }
            levels[usize::from(b.level) - 1].insert(b.pattern, Arc::new(RwLock::new(bucket)));
        }
        Ok(EstimatorStore {
            levels: levels.into_iter().map(RwLock::new).collect(),
            bias: Mutex::new(snap.bias.clone()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(snap.config.seed)),
            schema: schema.map(Arc::new),
            config: snap.config.clone(),
        })
    }
}
