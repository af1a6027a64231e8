//! Histogram-based heuristic estimator that treats columns as independent.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{literal_value, ColumnData, Dataset, Table, Value};
use crate::querygraph::{top_level_conjuncts, AttrKey, Comparison, NodeType, QueryDag};
use crate::schema::{parse_date, ColumnType};

pub const DEFAULT_BUCKETS: usize = 100;
pub const DEFAULT_MCV: usize = 10;
/// Selectivity of predicates the statistics cannot inform.
pub const DEFAULT_SELECTIVITY: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McvEntry {
    pub value: String,
    pub freq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnHistogram {
    pub column: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
    /// Equi-depth boundaries (`buckets + 1` of them); empty for strings.
    pub bounds: Vec<f64>,
    pub mcv: Vec<McvEntry>,
    pub null_frac: f64,
    pub num_distinct: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub name: String,
    pub row_count: u64,
    pub columns: BTreeMap<String, ColumnHistogram>,
}

/// Statistics for every table of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Statistics {
    pub tables: BTreeMap<String, TableStats>,
}

impl Statistics {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn table(&self, name: &str) -> Result<&TableStats> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::MissingStats(format!("table `{name}`")))
    }
}

/// Anything that can produce a fallback cardinality estimate.
pub trait HeuristicEstimator {
    fn estimate(&self, dag: &QueryDag) -> Result<u64>;
}

impl HeuristicEstimator for Statistics {
    fn estimate(&self, dag: &QueryDag) -> Result<u64> {
        heuristic_estimate(dag, self)
    }
}

pub fn analyze(data: &Dataset) -> Statistics {
    analyze_with(data, DEFAULT_BUCKETS, DEFAULT_MCV)
}

pub fn analyze_with(data: &Dataset, buckets: usize, mcv: usize) -> Statistics {
    Statistics {
        tables: data
            .tables()
            .map(|t| (t.name.clone(), analyze_table(t, buckets.max(1), mcv)))
            .collect(),
    }
}

pub fn analyze_table(t: &Table, buckets: usize, mcv: usize) -> TableStats {
    let columns = t
        .columns()
        .iter()
        .map(|(name, col)| (name.clone(), histogram(name, col, buckets, mcv)))
        .collect();
    TableStats {
        name: t.name.clone(),
        row_count: t.len() as u64,
        columns,
    }
}

fn histogram(name: &str, col: &ColumnData, buckets: usize, mcv_k: usize) -> ColumnHistogram {
    let n = col.len();
    let mut counts: HashMap<String, u64> = HashMap::new();
    for i in 0..n {
        *counts.entry(col.value(i).to_string()).or_default() += 1;
    }
    let mut freq: Vec<(String, u64)> = counts.into_iter().collect();
    freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let num_distinct = freq.len() as u64;
    let mcv = freq
        .into_iter()
        .take(mcv_k)
        .map(|(value, c)| McvEntry {
            value,
            freq: c as f64 / n as f64,
        })
        .collect();
    let mut nums: Vec<f64> = match col {
        ColumnData::Int(v) => v.iter().map(|&x| x as f64).collect(),
        ColumnData::Float(v) => v.clone(),
        ColumnData::Date(v) => v.iter().map(|&x| f64::from(x)).collect(),
        ColumnData::Str(_) => Vec::new(),
    };
    nums.sort_by(f64::total_cmp);
    let bounds = if nums.is_empty() {
        Vec::new()
    } else {
        (0..=buckets).map(|i| nums[i * (n - 1) / buckets]).collect()
    };
    ColumnHistogram {
        column: name.to_string(),
        ty: col.ty(),
        bounds,
        mcv,
        null_frac: 0.0,
        num_distinct,
    }
}

impl ColumnHistogram {
    pub fn eq_selectivity(&self, v: &Value) -> f64 {
        let key = self.normalise(v).to_string();
        match self.mcv.iter().find(|m| m.value == key) {
            Some(m) => m.freq,
            None => 1.0 / self.num_distinct.max(1) as f64,
        }
    }

    /// Fraction of rows strictly below `v`, or `None` when not ordinal.
    pub fn lt_fraction(&self, v: &Value) -> Option<f64> {
        let c = self.normalise(v).as_f64()?;
        if self.bounds.len() < 2 {
            return None;
        }
        let b = &self.bounds;
        let mut acc = 0.0;
        for w in b.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            acc += if c > hi {
                1.0
            } else if c <= lo {
                0.0
            } else {
                (c - lo) / (hi - lo)
            };
        }
        Some(acc / (b.len() - 1) as f64)
    }

    pub fn cmp_selectivity(&self, op: Comparison, v: &Value) -> f64 {
        let eq = self.eq_selectivity(v);
        let lt = || self.lt_fraction(v);
        let s = match op {
            Comparison::Eq => eq,
            Comparison::Ne => 1.0 - eq,
            Comparison::Lt => lt().unwrap_or(DEFAULT_SELECTIVITY),
            Comparison::Le => lt().map_or(DEFAULT_SELECTIVITY, |s| s + eq),
            Comparison::Gt => lt().map_or(DEFAULT_SELECTIVITY, |s| 1.0 - s - eq),
            Comparison::Ge => lt().map_or(DEFAULT_SELECTIVITY, |s| 1.0 - s),
        };
        s.clamp(0.0, 1.0)
    }

    /// The literal expressed in the column's own kind.
    fn normalise(&self, v: &Value) -> Value {
        match (self.ty, v) {
            (ColumnType::Date, Value::Str(s)) => parse_date(s).map_or(v.clone(), Value::Date),
            (ColumnType::Float, Value::Int(x)) => Value::Float(*x as f64),
            (ColumnType::Int, Value::Float(x)) if x.fract() == 0.0 => Value::Int(*x as i64),
            _ => v.clone(),
        }
    }
}

struct Ctx<'a> {
    dag: &'a QueryDag,
    stats: &'a Statistics,
}

impl Ctx<'_> {
    fn column(&self, col: usize) -> Result<(usize, &ColumnHistogram)> {
        let dag = self.dag;
        let alias = *dag
            .preds(col)
            .iter()
            .find(|&&p| dag.node_type(p) == NodeType::Alias)
            .ok_or_else(|| Error::Semantic("column without alias".into()))?;
        let table = dag
            .preds(alias)
            .iter()
            .find(|&&p| dag.node_type(p) == NodeType::Table)
            .map(|&t| dag.attr(t, AttrKey::TABLE_NAME))
            .unwrap_or("");
        let name = dag.attr(col, AttrKey::COLUMN_NAME);
        let h = self
            .stats
            .table(table)?
            .columns
            .get(name)
            .ok_or_else(|| Error::MissingStats(format!("column `{table}.{name}`")))?;
        Ok((alias, h))
    }

    fn literal(&self, j: usize) -> Value {
        literal_value(
            self.dag.attr(j, AttrKey::LITERAL_TYPE),
            self.dag.attr(j, AttrKey::LITERAL_VALUE),
        )
    }

    fn selectivity(&self, j: usize) -> Result<f64> {
        let dag = self.dag;
        let preds = dag.preds(j);
        if dag.node_type(j) != NodeType::Op {
            return Ok(DEFAULT_SELECTIVITY);
        }
        let code = dag.attr(j, AttrKey::OP_CODE);
        let kind = |k: usize| dag.node_type(preds[k]);
        Ok(match code {
            "AND" => preds
                .iter()
                .map(|&p| self.selectivity(p))
                .product::<Result<f64>>()?,
            "OR" => preds.iter().try_fold(0.0, |s, &p| {
                let t = self.selectivity(p)?;
                Ok::<_, Error>(s + t - s * t)
            })?,
            "NOT" if preds.len() == 1 => 1.0 - self.selectivity(preds[0])?,
            "IN" if !preds.is_empty() && kind(0) == NodeType::Column => {
                let (_, h) = self.column(preds[0])?;
                let s: f64 = preds[1..]
                    .iter()
                    .map(|&l| h.eq_selectivity(&self.literal(l)))
                    .sum();
                s.min(1.0)
            }
            _ => match Comparison::from_code(code) {
                Some(op) if preds.len() == 2 => match (kind(0), kind(1)) {
                    (NodeType::Column, NodeType::Literal) => {
                        let (_, h) = self.column(preds[0])?;
                        h.cmp_selectivity(op, &self.literal(preds[1]))
                    }
                    (NodeType::Literal, NodeType::Column) => {
                        let (_, h) = self.column(preds[1])?;
                        h.cmp_selectivity(op.flipped(), &self.literal(preds[0]))
                    }
                    (NodeType::Literal, NodeType::Literal) => {
                        let a = self.literal(preds[0]);
                        let b = self.literal(preds[1]);
                        let ord = a.compare(&b);
                        let hit = match (op, ord) {
                            (_, None) => false,
                            (Comparison::Eq, Some(o)) => o.is_eq(),
                            (Comparison::Ne, Some(o)) => o.is_ne(),
                            (Comparison::Lt, Some(o)) => o.is_lt(),
                            (Comparison::Le, Some(o)) => o.is_le(),
                            (Comparison::Gt, Some(o)) => o.is_gt(),
                            (Comparison::Ge, Some(o)) => o.is_ge(),
                        };
                        if hit {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    (NodeType::Column, NodeType::Column) if op == Comparison::Eq => {
                        let (_, a) = self.column(preds[0])?;
                        let (_, b) = self.column(preds[1])?;
                        1.0 / a.num_distinct.max(b.num_distinct).max(1) as f64
                    }
                    _ => DEFAULT_SELECTIVITY,
                },
                _ => DEFAULT_SELECTIVITY,
            },
        })
    }
}

/// Product of table sizes times predicate selectivities, clamped to
/// `[1, product of table sizes]`.
pub fn heuristic_estimate(dag: &QueryDag, stats: &Statistics) -> Result<u64> {
    let ctx = Ctx { dag, stats };
    let mut rows = 1.0f64;
    for t in dag.alias_tables() {
        rows *= stats.table(t)?.row_count as f64;
    }
    let mut est = rows;
    for c in top_level_conjuncts(dag) {
        est *= ctx.selectivity(c)?;
    }
    let est = est.round().min(rows).max(1.0);
    Ok(if est >= u64::MAX as f64 { u64::MAX } else { est as u64 })
}
