//! Run configuration: where data and queries come from, estimator settings
//! and output options.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{DEFAULT_BUCKETS, DEFAULT_MCV};
use crate::error::{Error, Result};
use crate::hierarchy::StoreConfig;
use crate::oracle::{
    generate_workload, make_correlated_dataset, read_sql, standard_dataset_spec, standard_workload_spec,
    Dataset, DatasetSpec, WorkloadSpec, DEFAULT_BUDGET,
};
use crate::schema::Schema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// One `<table>.csv` per schema table.
    Csv { dir: PathBuf },
    /// Generated from an explicit spec.
    Synthetic { spec: DatasetSpec },
    /// The bundled six-table dataset, seeded by the run seed.
    Standard {
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum WorkloadSource {
    /// `;`-separated SQL statements.
    File { path: PathBuf },
    Generator { spec: WorkloadSpec },
    /// The bundled 40-template workload, seeded by the run seed.
    Standard {
        #[serde(default = "default_per_template")]
        queries_per_template: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn default_per_template() -> usize {
    125
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSource,
    /// Schema file; derived from the data when absent.
    pub schema: Option<PathBuf>,
    pub workload: WorkloadSource,
    /// Levels, betas, learners, kernel width and bias correction.
    pub store: StoreConfig,
    /// Seeds the store and the bundled data and workload.
    pub seed: u64,
    /// Queries excluded from the post-warm-up summaries.
    pub warmup_queries: usize,
    pub histogram_buckets: usize,
    pub mcv_entries: usize,
    /// Oracle step budget per subquery.
    pub budget: u64,
    /// Record measured latencies in `replay.csv`; when off the latency
    /// columns hold 0 so that the file depends only on the seed.
    pub latency_columns: bool,
    /// Queries between rows of `cumulative.csv`.
    pub cumulative_step: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSource::Standard { scale: 1.0 },
            schema: None,
            workload: WorkloadSource::Standard {
                queries_per_template: 125,
            },
            store: StoreConfig::default(),
            seed: 42,
            warmup_queries: 1000,
            histogram_buckets: DEFAULT_BUCKETS,
            mcv_entries: DEFAULT_MCV,
            budget: DEFAULT_BUDGET,
            latency_columns: true,
            cumulative_step: 100,
            out: None,
        }
    }
}

/// Everything a run needs, loaded into memory.
pub struct Resolved {
    pub data: Dataset,
    pub schema: Schema,
    pub queries: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.store.validate()?;
        if self.cumulative_step == 0 {
            return Err(Error::Config("cumulative_step must be positive".into()));
        }
        if self.histogram_buckets == 0 {
            return Err(Error::Config("histogram_buckets must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if let DataSource::Standard { scale } = self.data {
            if !(scale > 0.0 && scale <= 1.0) {
                return Err(Error::Config(format!("dataset scale must lie in (0, 1], got {scale}")));
            }
        }
        if let DataSource::Csv { .. } = self.data {
            if self.schema.is_none() {
                return Err(Error::Config("CSV tables need a schema file".into()));
            }
        }
        Ok(())
    }

    /// The store configuration with the run seed applied.
    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            seed: self.seed,
            ..self.store.clone()
        }
    }

    pub fn load_data(&self) -> Result<(Dataset, Schema)> {
        let file_schema = self.schema.as_deref().map(Schema::load).transpose()?;
        let data = match &self.data {
            DataSource::Csv { dir } => {
                let schema = file_schema.as_ref().ok_or_else(|| Error::Config("CSV tables need a schema file".into()))?;
                Dataset::load_csv_dir(dir, schema)?
            }
            DataSource::Synthetic { spec } => make_correlated_dataset(spec)?,
            DataSource::Standard { scale } => make_correlated_dataset(&standard_dataset_spec(self.seed, *scale))?,
        };
        let schema = file_schema.unwrap_or_else(|| data.schema());
        Ok((data, schema))
    }

    pub fn load_queries(&self, data: &Dataset) -> Result<Vec<String>> {
        match &self.workload {
            WorkloadSource::File { path } => read_sql(path),
            WorkloadSource::Generator { spec } => generate_workload(spec, Some(data)),
            WorkloadSource::Standard { queries_per_template } => {
                generate_workload(&standard_workload_spec(self.seed, *queries_per_template), Some(data))
            }
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let (data, schema) = self.load_data()?;
        let queries = self.load_queries(&data)?;
        Ok(Resolved { data, schema, queries })
    }
}
