//! Schema binding: per-column type and summary statistics.
//!
//! The on-disk form is a JSON object `table -> column -> stats`, e.g.
//!
//! ```json
//! { "movies": { "stars": { "type": "int", "min": 0, "max": 5,
//!                          "num_uniques": 6, "table_size": 1000 } } }
//! ```
//!
//! Date bounds may be written either as ISO-8601 strings or as day numbers
//! relative to 1970-01-01.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    Float,
    String,
    Date,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Int => "int",
            ColumnType::Float => "float",
            ColumnType::String => "string",
            ColumnType::Date => "date",
        }
    }

    pub fn is_ordinal_numeric(self) -> bool {
        !matches!(self, ColumnType::String)
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A min/max bound as it appears in the schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StatValue {
    Number(f64),
    Text(String),
}

impl StatValue {
    /// Numeric view of the bound; dates map to their day number.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            StatValue::Number(v) => Some(*v),
            StatValue::Text(s) => parse_date(s).map(f64::from).or_else(|| s.parse().ok()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    #[serde(rename = "type")]
    pub ty: ColumnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<StatValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<StatValue>,
    pub num_uniques: u64,
    pub table_size: u64,
}

impl ColumnStats {
    pub fn range(&self) -> Option<(f64, f64)> {
        Some((self.min.as_ref()?.as_f64()?, self.max.as_ref()?.as_f64()?))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    pub tables: BTreeMap<String, BTreeMap<String, ColumnStats>>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn has_table(&self, table: &str) -> bool {
        self.tables.contains_key(table)
    }

    pub fn column(&self, table: &str, column: &str) -> Option<&ColumnStats> {
        self.tables.get(table)?.get(column)
    }

    pub fn table_size(&self, table: &str) -> Option<u64> {
        self.tables
            .get(table)?
            .values()
            .next()
            .map(|c| c.table_size)
    }

    /// Tables among `candidates` that define `column`.
    pub fn tables_with_column<'a>(
        &self,
        column: &str,
        candidates: impl IntoIterator<Item = &'a str>,
    ) -> Vec<&'a str> {
        candidates
            .into_iter()
            .filter(|t| self.column(t, column).is_some())
            .collect()
    }
}

/// Days since 1970-01-01 for an ISO-8601 `YYYY-MM-DD` string.
pub fn parse_date(s: &str) -> Option<i32> {
    let d = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()?;
    Some(days_from_date(d))
}

pub(crate) fn days_from_date(d: NaiveDate) -> i32 {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    (d - epoch).num_days() as i32
}

pub fn date_from_days(days: i32) -> NaiveDate {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    epoch + chrono::Duration::days(i64::from(days))
}

pub fn format_date(days: i32) -> String {
    date_from_days(days).format("%Y-%m-%d").to_string()
}

/// `[year, month, day]` of an ISO date string.
pub fn date_parts(s: &str) -> Option<[f64; 3]> {
    let d = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()?;
    Some([f64::from(d.year()), f64::from(d.month()), f64::from(d.day())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_json_roundtrip_with_date_bounds() {
        let text = r#"{"movies": {
            "year": {"type": "int", "min": 1990, "max": 2025, "num_uniques": 36, "table_size": 10},
            "released": {"type": "date", "min": "2000-01-01", "max": "2000-01-31", "num_uniques": 31, "table_size": 10},
            "title": {"type": "string", "num_uniques": 10, "table_size": 10}
        }}"#;
        let schema: Schema = serde_json::from_str(text).unwrap();
        assert_eq!(schema.table_size("movies"), Some(10));
        let released = schema.column("movies", "released").unwrap();
        let (lo, hi) = released.range().unwrap();
        assert_eq!(hi - lo, 30.0);
        assert!(schema.column("movies", "title").unwrap().range().is_none());
        let back: Schema = serde_json::from_str(&serde_json::to_string(&schema).unwrap()).unwrap();
        assert_eq!(back, schema);
    }

    #[test]
    fn date_helpers() {
        assert_eq!(parse_date("1970-01-02"), Some(1));
        assert_eq!(format_date(parse_date("2024-03-15").unwrap()), "2024-03-15");
        assert_eq!(date_parts("2024-03-15"), Some([2024.0, 3.0, 15.0]));
        assert_eq!(parse_date("2024-13-01"), None);
    }
}
