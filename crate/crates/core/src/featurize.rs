//! Canonically ordered numeric feature vectors.
//!
//! Walking nodes in canonical order, every extractor bound to the node's type
//! appends its output. The vector width therefore depends only on how many
//! nodes of each type the graph has (and on literal kinds, which are part of
//! every pattern hash), so all graphs sharing a pattern hash are aligned.

use serde::{Deserialize, Serialize};

use crate::canonhash::{Canonical, PatternHash};
use crate::error::{Error, Result};
use crate::querygraph::{AttrKey, NodeType, QueryDag};
use crate::schema::{date_parts, parse_date, ColumnStats, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorId {
    /// The attribute parsed as a number.
    Num,
    /// Numeric literal scaled into `[0, 1]` by its column's range.
    Scaled,
    /// Interval `[lo, hi]` in scaled units selected by an ordinal comparison.
    Comp,
    /// Code points of the first three characters.
    Ascii3,
    /// `[year, month, day]`.
    Date3,
    TableSize,
    /// `[min, max]` of the column.
    ColumnRange,
    /// Three-bit code for `=`, `>`, `>=`, `<`, `<=`.
    OrdinalOp,
    /// Dispatch on the literal's kind: numbers use `Num`, dates `Date3`,
    /// strings `Ascii3`.
    Literal,
}

impl ExtractorId {
    /// Output width, when it does not depend on the node.
    pub fn fixed_dim(self) -> Option<usize> {
        Some(match self {
            ExtractorId::Num | ExtractorId::Scaled | ExtractorId::TableSize => 1,
            ExtractorId::Comp | ExtractorId::ColumnRange => 2,
            ExtractorId::Ascii3 | ExtractorId::Date3 | ExtractorId::OrdinalOp => 3,
            ExtractorId::Literal => return None,
        })
    }
}

/// A learning feature: an attribute and the extractor applied to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureExtractorSpec {
    pub key: AttrKey,
    pub extractor: ExtractorId,
}

impl FeatureExtractorSpec {
    pub fn new(key: AttrKey, extractor: ExtractorId) -> Result<Self> {
        use ExtractorId::*;
        let ok = match extractor {
            Num | Ascii3 => true,
            Scaled | Comp | Date3 | Literal => key == AttrKey::LITERAL_VALUE,
            TableSize => key == AttrKey::TABLE_NAME,
            ColumnRange => key == AttrKey::COLUMN_NAME,
            OrdinalOp => key == AttrKey::OP_CODE,
        };
        if !key.is_registered() || !ok {
            return Err(Error::Config(format!(
                "extractor {extractor:?} cannot be bound to `{key}`"
            )));
        }
        Ok(FeatureExtractorSpec { key, extractor })
    }

    /// Width of this extractor's output on node `j` (0 when the type differs).
    pub fn dim_on(&self, dag: &QueryDag, j: usize) -> usize {
        if dag.node_type(j) != self.key.node_type {
            return 0;
        }
        self.extractor
            .fixed_dim()
            .unwrap_or_else(|| literal_kind_dim(dag.attr(j, AttrKey::LITERAL_TYPE)))
    }
}

fn literal_kind_dim(kind: &str) -> usize {
    match kind {
        "date" | "string" => 3,
        _ => 1,
    }
}

/// Default learning features of hierarchy level `k` (1 = most general).
pub fn default_learn_features(level: u8) -> Vec<FeatureExtractorSpec> {
    let mut feats = vec![FeatureExtractorSpec {
        key: AttrKey::LITERAL_VALUE,
        extractor: ExtractorId::Literal,
    }];
    if level <= 2 {
        feats.push(FeatureExtractorSpec {
            key: AttrKey::OP_CODE,
            extractor: ExtractorId::OrdinalOp,
        });
    }
    if level <= 1 {
        feats.push(FeatureExtractorSpec {
            key: AttrKey::COLUMN_NUM_UNIQUES,
            extractor: ExtractorId::Num,
        });
    }
    feats
}

/// A canonically ordered feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub pattern: PatternHash,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Closed-form width of the feature vector.
pub fn feature_dim(dag: &QueryDag, feats: &[FeatureExtractorSpec]) -> usize {
    (0..dag.len())
        .map(|j| feats.iter().map(|f| f.dim_on(dag, j)).sum::<usize>())
        .sum()
}

/// Concatenates extractor outputs over nodes in canonical order.
pub fn extract(
    dag: &QueryDag,
    canon: &Canonical,
    feats: &[FeatureExtractorSpec],
    schema: Option<&Schema>,
) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(feature_dim(dag, feats));
    for &j in &canon.order.perm {
        for f in feats.iter().filter(|f| f.key.node_type == dag.node_type(j)) {
            apply(dag, j, f, schema, &mut values)?;
        }
    }
    for v in &mut values {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    Ok(FeatureVector {
        values,
        pattern: canon.hash,
    })
}

fn apply(
    dag: &QueryDag,
    j: usize,
    spec: &FeatureExtractorSpec,
    schema: Option<&Schema>,
    out: &mut Vec<f64>,
) -> Result<()> {
    let raw = dag.attr(j, spec.key);
    let missing = raw.is_empty();
    let dim = spec.dim_on(dag, j);
    if missing {
        out.extend(std::iter::repeat_n(0.0, dim));
        return Ok(());
    }
    match spec.extractor {
        ExtractorId::Num => out.push(f_num(raw)),
        ExtractorId::Ascii3 => out.extend(f_ascii3(raw)),
        ExtractorId::Date3 => out.extend(f_date(raw).unwrap_or([0.0; 3])),
        ExtractorId::OrdinalOp => out.extend(f_ordinal_op(raw)),
        ExtractorId::Literal => match dag.attr(j, AttrKey::LITERAL_TYPE) {
            "date" => out.extend(f_date(raw).unwrap_or([0.0; 3])),
            "string" => out.extend(f_ascii3(raw)),
            _ => out.push(f_num(raw)),
        },
        ExtractorId::Scaled => {
            let (stats, _) = literal_column(dag, j, schema)?;
            out.push(f_scaled(literal_number(raw), stats)?);
        }
        ExtractorId::Comp => {
            let (stats, op) = literal_column(dag, j, schema)?;
            out.extend(f_comp(literal_number(raw), &op, stats)?);
        }
        ExtractorId::TableSize => {
            let size = schema
                .and_then(|s| s.table_size(raw))
                .ok_or_else(|| Error::Schema(format!("no size for table `{raw}`")))?;
            out.push(size as f64);
        }
        ExtractorId::ColumnRange => {
            let (table, column) = column_owner(dag, j)
                .ok_or_else(|| Error::Schema(format!("column `{raw}` has no table")))?;
            let stats = schema
                .and_then(|s| s.column(table, column))
                .ok_or_else(|| Error::Schema(format!("no statistics for `{table}.{column}`")))?;
            let (lo, hi) = stats
                .range()
                .ok_or_else(|| Error::Schema(format!("no range for `{table}.{column}`")))?;
            out.extend([lo, hi]);
        }
    }
    Ok(())
}

fn literal_number(raw: &str) -> f64 {
    parse_date(raw).map(f64::from).unwrap_or_else(|| f_num(raw))
}

fn column_owner(dag: &QueryDag, col: usize) -> Option<(&str, &str)> {
    let alias = *dag
        .preds(col)
        .iter()
        .find(|&&p| dag.node_type(p) == NodeType::Alias)?;
    let table = *dag
        .preds(alias)
        .iter()
        .find(|&&p| dag.node_type(p) == NodeType::Table)?;
    Some((dag.attr(table, AttrKey::TABLE_NAME), dag.attr(col, AttrKey::COLUMN_NAME)))
}

/// Statistics of the column a literal is compared with, and the op code.
fn literal_column<'s>(
    dag: &QueryDag,
    lit: usize,
    schema: Option<&'s Schema>,
) -> Result<(&'s ColumnStats, String)> {
    let op = dag
        .succs(lit)
        .iter()
        .copied()
        .find(|&s| dag.node_type(s) == NodeType::Op)
        .ok_or_else(|| Error::Schema("literal is not compared with a column".into()))?;
    let col = dag
        .preds(op)
        .iter()
        .copied()
        .find(|&p| dag.node_type(p) == NodeType::Column)
        .ok_or_else(|| Error::Schema("literal is not compared with a column".into()))?;
    let (table, column) = column_owner(dag, col)
        .ok_or_else(|| Error::Schema("column has no owning table".into()))?;
    let stats = schema
        .and_then(|s| s.column(table, column))
        .ok_or_else(|| Error::Schema(format!("no statistics for `{table}.{column}`")))?;
    Ok((stats, dag.attr(op, AttrKey::OP_CODE).to_string()))
}

pub fn f_num(raw: &str) -> f64 {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite()).unwrap_or(0.0)
}

/// `(m - min) / (max - min)`, clamped to `[0, 1]`.
pub fn f_scaled(m: f64, stats: &ColumnStats) -> Result<f64> {
    let (lo, hi) = stats
        .range()
        .ok_or_else(|| Error::Schema("column has no min/max".into()))?;
    if hi <= lo {
        return Err(Error::Schema(format!("degenerate column range [{lo}, {hi}]")));
    }
    Ok(((m - lo) / (hi - lo)).clamp(0.0, 1.0))
}

pub fn f_comp(m: f64, op: &str, stats: &ColumnStats) -> Result<[f64; 2]> {
    let s = f_scaled(m, stats)?;
    Ok(match op {
        "<" | "<=" => [0.0, s],
        ">" | ">=" => [s, 1.0],
        "=" | "IN" => [s, s],
        _ => [0.0, 1.0],
    })
}

pub fn f_ascii3(s: &str) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (slot, ch) in out.iter_mut().zip(s.chars()) {
        *slot = f64::from(u32::from(ch) % 128);
    }
    out
}

pub fn f_date(s: &str) -> Option<[f64; 3]> {
    date_parts(s)
}

pub fn f_ordinal_op(code: &str) -> [f64; 3] {
    match code {
        "=" => [0.0, 1.0, 0.0],
        ">" => [0.0, 0.0, 1.0],
        ">=" => [0.0, 1.0, 1.0],
        "<" => [1.0, 0.0, 0.0],
        "<=" => [1.0, 1.0, 0.0],
        _ => [0.0; 3],
    }
}
