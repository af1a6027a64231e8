//! CSV and JSON reports of a replay.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{Percentiles, QErrorSummary};
use super::{RunConfig, SimulationOutput, Summary, Timings};
use crate::error::{Error, Result};
use crate::hierarchy::Provenance;

/// One line of `replay.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub query_id: usize,
    pub subquery_id: usize,
    pub n_join: usize,
    pub h1: String,
    pub h2: String,
    pub h3: String,
    pub provenance: String,
    pub estimate: u64,
    pub truth: u64,
    pub q_error: f64,
    pub est_us: f64,
    pub obs_us: f64,
}

/// One line of `baseline.csv`: the heuristic's answer for the same
/// subquery, and the level-3 bucket size when it was estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub query_id: usize,
    pub subquery_id: usize,
    pub heuristic_estimate: u64,
    pub heuristic_q_error: f64,
    pub bucket_size: usize,
}

/// Percentiles over all subqueries of the first `queries` queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeRow {
    pub queries: usize,
    pub subqueries: usize,
    pub learned_p50: f64,
    pub learned_p90: f64,
    pub learned_p95: f64,
    pub heuristic_p50: f64,
    pub heuristic_p90: f64,
    pub heuristic_p95: f64,
    /// Share of heuristic answers among queries since the previous row.
    pub heuristic_share: f64,
}

fn micros(d: std::time::Duration, on: bool) -> f64 {
    if on {
        (d.as_secs_f64() * 1e9).round() / 1e3
    } else {
        0.0
    }
}

pub fn cumulative_rows(out: &SimulationOutput, step: usize) -> Vec<CumulativeRow> {
    let recs = &out.records;
    let total = out.summary.queries;
    let step = step.max(1);
    let mut rows = Vec::new();
    let mut learned = Vec::new();
    let mut heuristic = Vec::new();
    let mut i = 0;
    let mut q = step.min(total);
    while q > 0 {
        let start = i;
        while i < recs.len() && recs[i].query_id < q {
            learned.push(recs[i].q_error);
            heuristic.push(recs[i].heuristic_q_error);
            i += 1;
        }
        let window = &recs[start..i];
        let l = Percentiles::of(&learned);
        let h = Percentiles::of(&heuristic);
        if l.count > 0 {
            rows.push(CumulativeRow {
                queries: q,
                subqueries: i,
                learned_p50: l.p50.unwrap(),
                learned_p90: l.p90.unwrap(),
                learned_p95: l.p95.unwrap(),
                heuristic_p50: h.p50.unwrap(),
                heuristic_p90: h.p90.unwrap(),
                heuristic_p95: h.p95.unwrap(),
                heuristic_share: window.iter().filter(|r| r.provenance == Provenance::Heuristic).count() as f64
                    / window.len().max(1) as f64,
            });
        }
        if q == total {
            break;
        }
        q = (q + step).min(total);
    }
    rows
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `replay.csv`, `baseline.csv`, `cumulative.csv` and `summary.json`
/// into `dir`.
pub fn emit_reports(out: &SimulationOutput, dir: &Path, config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let lat = config.latency_columns;
    write_rows(
        &dir.join("replay.csv"),
        out.records.iter().map(|r| ReplayRow {
            query_id: r.query_id,
            subquery_id: r.subquery_id,
            n_join: r.n_join,
            h1: r.hashes[0].to_hex(),
            h2: r.hashes[1].to_hex(),
            h3: r.hashes[2].to_hex(),
            provenance: r.provenance.as_str().to_string(),
            estimate: r.estimate,
            truth: r.truth,
            q_error: r.q_error,
            est_us: micros(r.est_time, lat),
            obs_us: micros(r.obs_time, lat),
        }),
    )?;
    write_rows(
        &dir.join("baseline.csv"),
        out.records.iter().map(|r| BaselineRow {
            query_id: r.query_id,
            subquery_id: r.subquery_id,
            heuristic_estimate: r.heuristic,
            heuristic_q_error: r.heuristic_q_error,
            bucket_size: r.bucket_size(),
        }),
    )?;
    write_rows(&dir.join("cumulative.csv"), cumulative_rows(out, config.cumulative_step))?;
    let path = dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&out.summary)?).map_err(|e| Error::io(&path, e))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_replay(path: &Path) -> Result<Vec<ReplayRow>> {
    read_rows(path)
}

pub fn read_baseline(path: &Path) -> Result<Vec<BaselineRow>> {
    read_rows(path)
}

/// Recomputes the summary from report files. Without baseline rows the
/// heuristic summaries stay empty.
pub fn summary_from_rows(replay: &[ReplayRow], baseline: Option<&[BaselineRow]>, warmup_queries: usize) -> Result<Summary> {
    if let Some(b) = baseline {
        if b.len() != replay.len() {
            return Err(Error::Config(format!(
                "baseline has {} rows, replay {}",
                b.len(),
                replay.len()
            )));
        }
    }
    let learned = |post: bool| {
        QErrorSummary::from_samples(
            replay
                .iter()
                .filter(|r| !post || r.query_id >= warmup_queries)
                .map(|r| (r.q_error, r.n_join, r.provenance.as_str())),
        )
    };
    let heuristic = |post: bool| match baseline {
        Some(b) => QErrorSummary::from_samples(
            replay
                .iter()
                .zip(b)
                .filter(|(r, _)| !post || r.query_id >= warmup_queries)
                .map(|(r, b)| (b.heuristic_q_error, r.n_join, r.provenance.as_str())),
        ),
        None => QErrorSummary::default(),
    };
    let queries = replay.iter().map(|r| r.query_id + 1).max().unwrap_or(0);
    let n = replay.len().max(1) as f64;
    let est: f64 = replay.iter().map(|r| r.est_us).sum();
    Ok(Summary {
        queries,
        subqueries: replay.len(),
        warmup_queries,
        learned: learned(false),
        heuristic: heuristic(false),
        learned_post_warmup: learned(true),
        heuristic_post_warmup: heuristic(true),
        timings: Timings {
            estimate_s: est / 1e6,
            observe_s: replay.iter().map(|r| r.obs_us).sum::<f64>() / 1e6,
            mean_estimate_us: est / n,
            ..Timings::default()
        },
        config: None,
    })
}

fn fmt_p(p: &Percentiles) -> String {
    match (p.p50, p.p90, p.p95) {
        (Some(a), Some(b), Some(c)) => format!("{:>8} {:>10.2} {:>10.2} {:>10.2}", p.count, a, b, c),
        _ => format!("{:>8} {:>10} {:>10} {:>10}", p.count, "-", "-", "-"),
    }
}

/// Plain-text table of a summary.
pub fn render_summary(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "queries {}  subqueries {}  warm-up {}", s.queries, s.subqueries, s.warmup_queries);
    let _ = writeln!(out, "{:<28} {:>8} {:>10} {:>10} {:>10}", "", "count", "p50", "p90", "p95");
    for (name, q) in [
        ("learned", &s.learned),
        ("heuristic", &s.heuristic),
        ("learned (after warm-up)", &s.learned_post_warmup),
        ("heuristic (after warm-up)", &s.heuristic_post_warmup),
    ] {
        let _ = writeln!(out, "{name:<28} {}", fmt_p(&q.overall));
    }
    let _ = writeln!(out, "learned by join count (after warm-up)");
    for (j, p) in &s.learned_post_warmup.by_join_count {
        let _ = writeln!(out, "  {:<26} {}", j, fmt_p(p));
    }
    let _ = writeln!(out, "learned by provenance (after warm-up)");
    for (k, p) in &s.learned_post_warmup.by_provenance {
        let _ = writeln!(out, "  {:<26} {}", k, fmt_p(p));
    }
    let t = &s.timings;
    let _ = writeln!(
        out,
        "estimate {:.2}s  observe {:.2}s  mean estimate {:.1}us",
        t.estimate_s, t.observe_s, t.mean_estimate_us
    );
    out
}
