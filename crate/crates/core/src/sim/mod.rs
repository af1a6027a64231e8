//! Workload replay: estimate every subquery with the learned store and the
//! heuristic baseline, execute it for the truth, then feed the truth back.

mod config;
mod metrics;
mod report;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baseline::{analyze_with, heuristic_estimate, Statistics};
use crate::canonhash::PatternHash;
use crate::error::{Error, Result};
use crate::hierarchy::{EstimatorStore, Provenance};
use crate::oracle::{Dataset, Executor};
use crate::querygraph::{enumerate_subqueries, parse_sql};
use crate::schema::Schema;

pub use config::{DataSource, Resolved, RunConfig, WorkloadSource};
pub use metrics::{percentile, q_error, Percentiles, QErrorSummary};
pub use report::{
    cumulative_rows, emit_reports, read_baseline, read_replay, render_summary, summary_from_rows, BaselineRow,
    CumulativeRow, ReplayRow,
};

/// One estimated subquery.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub query_id: usize,
    pub subquery_id: usize,
    pub n_join: usize,
    /// Pattern hashes at levels 1, 2, 3.
    pub hashes: [PatternHash; 3],
    pub provenance: Provenance,
    pub estimate: u64,
    pub truth: u64,
    pub q_error: f64,
    pub heuristic: u64,
    pub heuristic_q_error: f64,
    /// Bucket sizes at levels 1, 2, 3 when the estimate was made.
    pub level_sizes: [usize; 3],
    /// Size of the bucket whose model answered (level-3 size for the
    /// heuristic).
    pub answer_bucket: usize,
    pub est_time: Duration,
    pub obs_time: Duration,
}

impl ReplayRecord {
    /// Level-3 bucket size at estimate time.
    pub fn bucket_size(&self) -> usize {
        self.level_sizes[2]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Hashing, featurization, model refits and prediction.
    pub estimate_s: f64,
    /// Appending observations to the store.
    pub observe_s: f64,
    pub heuristic_s: f64,
    pub oracle_s: f64,
    pub wall_s: f64,
    pub mean_estimate_us: f64,
    /// Mean estimate latency where the answering bucket held at most 1000
    /// rows.
    pub mean_estimate_us_small_buckets: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub queries: usize,
    pub subqueries: usize,
    pub warmup_queries: usize,
    pub learned: QErrorSummary,
    pub heuristic: QErrorSummary,
    pub learned_post_warmup: QErrorSummary,
    pub heuristic_post_warmup: QErrorSummary,
    #[serde(default)]
    pub timings: Timings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

impl Summary {
    /// Percentile summaries of the learned pipeline and the baseline, over
    /// everything and over queries after the warm-up.
    pub fn from_records(records: &[ReplayRecord], queries: usize, warmup_queries: usize) -> Self {
        let learned = |post: bool| {
            QErrorSummary::from_samples(
                records
                    .iter()
                    .filter(|r| !post || r.query_id >= warmup_queries)
                    .map(|r| (r.q_error, r.n_join, r.provenance.as_str())),
            )
        };
        let heuristic = |post: bool| {
            QErrorSummary::from_samples(
                records
                    .iter()
                    .filter(|r| !post || r.query_id >= warmup_queries)
                    .map(|r| (r.heuristic_q_error, r.n_join, r.provenance.as_str())),
            )
        };
        Summary {
            queries,
            subqueries: records.len(),
            warmup_queries,
            learned: learned(false),
            heuristic: heuristic(false),
            learned_post_warmup: learned(true),
            heuristic_post_warmup: heuristic(true),
            timings: Timings::default(),
            config: None,
        }
    }
}

pub struct SimulationOutput {
    pub records: Vec<ReplayRecord>,
    pub summary: Summary,
    /// The store after the last observation.
    pub store: EstimatorStore,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Replays `queries` in order against `data`. `progress` is called after
/// each query with the number of queries done.
pub fn simulate(
    data: &Dataset,
    schema: &Schema,
    queries: &[String],
    config: &RunConfig,
    progress: &mut dyn FnMut(usize),
) -> Result<SimulationOutput> {
    config.validate()?;
    let wall = Instant::now();
    let store = EstimatorStore::new(config.store_config(), Some(schema.clone()))?;
    let stats: Statistics = analyze_with(data, config.histogram_buckets, config.mcv_entries);
    let mut exec = Executor::new(data).with_budget(config.budget);
    let mut records = Vec::new();
    let mut t = Timings::default();
    for (qi, sql) in queries.iter().enumerate() {
        let wrap = |e: Error| Error::Query {
            index: qi,
            sql: sql.clone(),
            source: Box::new(e),
        };
        let dag = parse_sql(sql, Some(schema)).map_err(wrap)?;
        let subs = enumerate_subqueries(&dag);
        let mut pending = Vec::with_capacity(subs.len());
        for sub in &subs {
            let t0 = Instant::now();
            let h = heuristic_estimate(sub, &stats).map_err(wrap)?;
            t.heuristic_s += secs(t0.elapsed());
            let t1 = Instant::now();
            let a = store.analyze(sub).map_err(wrap)?;
            let est = store.estimate_analyzed(&a, h);
            let est_time = t1.elapsed();
            t.estimate_s += secs(est_time);
            pending.push((a, h, est, est_time));
        }
        exec.clear_cache();
        let t2 = Instant::now();
        let truths = subs
            .iter()
            .map(|s| exec.count(s))
            .collect::<Result<Vec<u64>>>()
            .map_err(wrap)?;
        t.oracle_s += secs(t2.elapsed());
        for (si, ((a, h, est, est_time), truth)) in pending.into_iter().zip(truths).enumerate() {
            let t3 = Instant::now();
            store.observe_analyzed(&a, truth, Some(h)).map_err(wrap)?;
            let obs_time = t3.elapsed();
            t.observe_s += secs(obs_time);
            records.push(ReplayRecord {
                query_id: qi,
                subquery_id: si,
                n_join: a.n_join,
                hashes: [a.hash(1), a.hash(2), a.hash(3)],
                provenance: est.provenance,
                estimate: est.cardinality,
                truth,
                q_error: q_error(truth, est.cardinality),
                heuristic: h,
                heuristic_q_error: q_error(truth, h),
                level_sizes: est.level_sizes,
                answer_bucket: est.bucket_size,
                est_time,
                obs_time,
            });
        }
        progress(qi + 1);
    }
    t.wall_s = secs(wall.elapsed());
    let mean_us = |rs: &mut dyn Iterator<Item = &ReplayRecord>| {
        let (n, sum) = rs.fold((0usize, 0.0), |(n, s), r| (n + 1, s + r.est_time.as_secs_f64() * 1e6));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    t.mean_estimate_us = mean_us(&mut records.iter());
    t.mean_estimate_us_small_buckets = mean_us(&mut records.iter().filter(|r| r.answer_bucket <= 1000));
    let mut summary = Summary::from_records(&records, queries.len(), config.warmup_queries);
    summary.timings = t;
    summary.config = Some(config.clone());
    Ok(SimulationOutput { records, summary, store })
}

/// Loads data and workload as configured, replays, and writes the reports
/// when an output directory is set.
pub fn run_simulation(config: &RunConfig, progress: &mut dyn FnMut(usize)) -> Result<SimulationOutput> {
    let Resolved { data, schema, queries } = config.resolve()?;
    let out = simulate(&data, &schema, &queries, config, progress)?;
    if let Some(dir) = &config.out {
        emit_reports(&out, dir, config)?;
    }
    Ok(out)
}
