//! Seeded synthetic tables with controllable skew and cross-column (and
//! cross-table) dependencies.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset, Table};
use crate::error::{Error, Result};
use crate::schema::parse_date;

/// Integer map `round(scale * x + offset) + U[-jitter, jitter]`, optionally
/// wrapped into `1..=modulo` and clamped; with probability `noise` the value
/// is replaced by a uniform draw from `noise_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntMap {
    pub scale: f64,
    pub offset: f64,
    pub jitter: i64,
    pub modulo: Option<i64>,
    pub clamp: Option<(i64, i64)>,
    pub noise: f64,
    pub noise_range: (i64, i64),
}

impl Default for IntMap {
    fn default() -> Self {
        IntMap {
            scale: 1.0,
            offset: 0.0,
            jitter: 0,
            modulo: None,
            clamp: None,
            noise: 0.0,
            noise_range: (0, 0),
        }
    }
}

impl IntMap {
    fn apply(&self, x: i64, rng: &mut ChaCha8Rng) -> i64 {
        if self.noise > 0.0 && rng.gen::<f64>() < self.noise {
            let (lo, hi) = self.noise_range;
            return rng.gen_range(lo.min(hi)..=hi.max(lo));
        }
        let mut v = (self.scale * x as f64 + self.offset).round() as i64;
        if self.jitter > 0 {
            v += rng.gen_range(-self.jitter..=self.jitter);
        }
        if let Some(m) = self.modulo.filter(|&m| m > 0) {
            v = v.rem_euclid(m) + 1;
        }
        if let Some((lo, hi)) = self.clamp {
            v = v.clamp(lo, hi);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnGen {
    /// `start, start + 1, ...`
    Sequence { start: i64 },
    UniformInt { lo: i64, hi: i64 },
    UniformFloat { lo: f64, hi: f64 },
    /// Finite Zipf over `1..=n` with exponent `s`, plus `offset`.
    Zipf {
        n: u64,
        s: f64,
        #[serde(default)]
        offset: i64,
    },
    /// A function of an earlier integer column of the same table.
    Derived { from: String, map: IntMap },
    /// Keys of a parent table's rows; rows are drawn with weight
    /// `(v - min + 1)^weight_exponent` of the parent's `weight_by` column,
    /// times `rank^-zipf` of the parent row position.
    ForeignKey {
        table: String,
        column: String,
        #[serde(default)]
        weight_by: Option<String>,
        #[serde(default)]
        weight_exponent: f64,
        #[serde(default)]
        zipf: f64,
    },
    /// A function of a column of the parent row chosen by foreign key `via`.
    FromParent { via: String, column: String, map: IntMap },
    /// Uniform date in `[start, start + days)`.
    Date { start: String, days: u32 },
    /// A date within the year held in an earlier column.
    DateInYear { from: String },
    /// Weighted choice among strings.
    Choice {
        values: Vec<String>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub gen: ColumnGen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub name: String,
    pub rows: usize,
    pub columns: Vec<ColumnSpec>,
}

/// Tables are generated in order; foreign keys may only point backwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub seed: u64,
    pub tables: Vec<TableSpec>,
}

fn zipf_weights(n: u64, s: f64) -> Vec<f64> {
    (1..=n).map(|k| (k as f64).powf(-s)).collect()
}

fn int_column<'a>(cols: &'a [(String, ColumnData)], name: &str, table: &str) -> Result<&'a [i64]> {
    match cols.iter().find(|c| c.0 == name).map(|c| &c.1) {
        Some(ColumnData::Int(v)) => Ok(v),
        Some(_) => Err(Error::Config(format!("`{table}.{name}` is not an integer column"))),
        None => Err(Error::Config(format!("`{table}.{name}` must be generated earlier"))),
    }
}

fn weighted(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::Config(format!("invalid weights: {e}")))
}

/// Generates every table of `spec`; deterministic in the seed.
pub fn make_correlated_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut data = Dataset::new();
    for ts in &spec.tables {
        let n = ts.rows;
        let mut cols: Vec<(String, ColumnData)> = Vec::new();
        // Parent row chosen for each row, per foreign-key column.
        let mut parents: HashMap<String, (String, Vec<usize>)> = HashMap::new();
        for cs in &ts.columns {
            let col = match &cs.gen {
                ColumnGen::Sequence { start } => ColumnData::Int((0..n as i64).map(|i| start + i).collect()),
                ColumnGen::UniformInt { lo, hi } => {
                    ColumnData::Int((0..n).map(|_| rng.gen_range(*lo..=*hi)).collect())
                }
                ColumnGen::UniformFloat { lo, hi } => {
                    ColumnData::Float((0..n).map(|_| rng.gen_range(*lo..*hi)).collect())
                }
                ColumnGen::Zipf { n: k, s, offset } => {
                    let dist = weighted(&zipf_weights(*k, *s))?;
                    ColumnData::Int((0..n).map(|_| dist.sample(&mut rng) as i64 + 1 + offset).collect())
                }
                ColumnGen::Derived { from, map } => {
                    let src = int_column(&cols, from, &ts.name)?.to_vec();
                    ColumnData::Int(src.iter().map(|&x| map.apply(x, &mut rng)).collect())
                }
                ColumnGen::ForeignKey {
                    table,
                    column,
                    weight_by,
                    weight_exponent,
                    zipf,
                } => {
                    let parent = data
                        .table(table)
                        .ok_or_else(|| Error::Config(format!("parent table `{table}` must come first")))?;
                    let keys = int_column(parent.columns(), column, table)?;
                    if keys.is_empty() {
                        return Err(Error::Config(format!("parent table `{table}` is empty")));
                    }
                    let mut w = vec![1.0f64; keys.len()];
                    if let Some(by) = weight_by {
                        let v = int_column(parent.columns(), by, table)?;
                        let min = v.iter().copied().min().unwrap_or(0);
                        for (wi, &x) in w.iter_mut().zip(v) {
                            *wi *= ((x - min + 1) as f64).powf(*weight_exponent);
                        }
                    }
                    if *zipf != 0.0 {
                        for (r, wi) in w.iter_mut().enumerate() {
                            *wi *= ((r + 1) as f64).powf(-zipf);
                        }
                    }
                    let dist = weighted(&w)?;
                    let rows: Vec<usize> = (0..n).map(|_| dist.sample(&mut rng)).collect();
                    let col = ColumnData::Int(rows.iter().map(|&r| keys[r]).collect());
                    parents.insert(cs.name.clone(), (table.clone(), rows));
                    col
                }
                ColumnGen::FromParent { via, column, map } => {
                    let (table, rows) = parents
                        .get(via)
                        .ok_or_else(|| Error::Config(format!("`{via}` is not an earlier foreign key")))?;
                    let parent = data.table(table).unwrap();
                    let src = int_column(parent.columns(), column, table)?;
                    ColumnData::Int(rows.iter().map(|&r| map.apply(src[r], &mut rng)).collect())
                }
                ColumnGen::Date { start, days } => {
                    let s = parse_date(start)
                        .ok_or_else(|| Error::Config(format!("bad start date `{start}`")))?;
                    ColumnData::Date((0..n).map(|_| s + rng.gen_range(0..(*days).max(1)) as i32).collect())
                }
                ColumnGen::DateInYear { from } => {
                    let years = int_column(&cols, from, &ts.name)?.to_vec();
                    ColumnData::Date(
                        years
                            .iter()
                            .map(|&y| {
                                let jan1 = parse_date(&format!("{:04}-01-01", y.clamp(1, 9998))).unwrap();
                                jan1 + rng.gen_range(0..365)
                            })
                            .collect(),
                    )
                }
                ColumnGen::Choice { values, weights } => {
                    if values.is_empty() {
                        return Err(Error::Config(format!("`{}.{}` has no values", ts.name, cs.name)));
                    }
                    let w = weights.clone().unwrap_or_else(|| vec![1.0; values.len()]);
                    if w.len() != values.len() {
                        return Err(Error::Config(format!("`{}.{}` weights/values differ", ts.name, cs.name)));
                    }
                    let dist = weighted(&w)?;
                    ColumnData::Str((0..n).map(|_| values[dist.sample(&mut rng)].clone()).collect())
                }
            };
            cols.push((cs.name.clone(), col));
        }
        data.insert(Table::new(ts.name.clone(), cols)?);
    }
    Ok(data)
}

fn col(name: &str, gen: ColumnGen) -> ColumnSpec {
    ColumnSpec {
        name: name.to_string(),
        gen,
    }
}

fn fk(table: &str, weight_by: Option<&str>, weight_exponent: f64, zipf: f64) -> ColumnGen {
    ColumnGen::ForeignKey {
        table: table.to_string(),
        column: "id".to_string(),
        weight_by: weight_by.map(str::to_string),
        weight_exponent,
        zipf,
    }
}

fn from_parent(column: &str, map: IntMap) -> ColumnGen {
    ColumnGen::FromParent {
        via: "movie_id".to_string(),
        column: column.to_string(),
        map,
    }
}

/// Six movie-database tables whose filters and join fan-outs are strongly
/// correlated. `scale` multiplies every table size (1.0 gives at most 100k
/// rows per table).
pub fn standard_dataset_spec(seed: u64, scale: f64) -> DatasetSpec {
    let rows = |n: f64| ((n * scale).round() as usize).max(10);
    let title = TableSpec {
        name: "title".into(),
        rows: rows(40_000.0),
        columns: vec![
            col("id", ColumnGen::Sequence { start: 1 }),
            col("kind_id", ColumnGen::Zipf { n: 7, s: 1.1, offset: 0 }),
            col(
                "production_year",
                ColumnGen::Derived {
                    from: "kind_id".into(),
                    map: IntMap {
                        scale: -12.0,
                        offset: 2030.0,
                        jitter: 12,
                        clamp: Some((1880, 2025)),
                        noise: 0.08,
                        noise_range: (1880, 2025),
                        ..IntMap::default()
                    },
                },
            ),
            col(
                "genre",
                ColumnGen::Choice {
                    values: ["Drama", "Comedy", "Action", "Horror", "Documentary", "Thriller"]
                        .map(String::from)
                        .to_vec(),
                    weights: Some(vec![8.0, 6.0, 4.0, 2.0, 1.0, 3.0]),
                },
            ),
            col("release_date", ColumnGen::DateInYear { from: "production_year".into() }),
        ],
    };
    let movie_companies = TableSpec {
        name: "movie_companies".into(),
        rows: rows(80_000.0),
        columns: vec![
            col("movie_id", fk("title", Some("production_year"), 3.0, 0.0)),
            col("company_id", ColumnGen::Zipf { n: 5000, s: 1.05, offset: 0 }),
            col(
                "company_type_id",
                from_parent(
                    "kind_id",
                    IntMap {
                        modulo: Some(4),
                        noise: 0.15,
                        noise_range: (1, 4),
                        ..IntMap::default()
                    },
                ),
            ),
        ],
    };
    let cast_info = TableSpec {
        name: "cast_info".into(),
        rows: rows(100_000.0),
        columns: vec![
            col("movie_id", fk("title", Some("kind_id"), -2.0, 0.0)),
            col("person_id", ColumnGen::Zipf { n: 20_000, s: 0.9, offset: 0 }),
            col(
                "role_id",
                from_parent(
                    "production_year",
                    IntMap {
                        scale: 0.1,
                        offset: -187.0,
                        jitter: 1,
                        clamp: Some((1, 12)),
                        noise: 0.1,
                        noise_range: (1, 12),
                        ..IntMap::default()
                    },
                ),
            ),
        ],
    };
    let movie_info = TableSpec {
        name: "movie_info".into(),
        rows: rows(90_000.0),
        columns: vec![
            col("movie_id", fk("title", Some("production_year"), 2.0, 0.6)),
            col(
                "info_type_id",
                from_parent(
                    "kind_id",
                    IntMap {
                        scale: 3.0,
                        jitter: 2,
                        clamp: Some((1, 25)),
                        noise: 0.15,
                        noise_range: (1, 25),
                        ..IntMap::default()
                    },
                ),
            ),
        ],
    };
    let movie_keyword = TableSpec {
        name: "movie_keyword".into(),
        rows: rows(100_000.0),
        columns: vec![
            col("movie_id", fk("title", Some("kind_id"), -1.5, 0.0)),
            col(
                "keyword_id",
                from_parent(
                    "production_year",
                    IntMap {
                        scale: 20.0,
                        offset: -37_600.0,
                        jitter: 200,
                        clamp: Some((1, 3000)),
                        noise: 0.1,
                        noise_range: (1, 3000),
                        ..IntMap::default()
                    },
                ),
            ),
        ],
    };
    let movie_info_idx = TableSpec {
        name: "movie_info_idx".into(),
        rows: rows(60_000.0),
        columns: vec![
            col("movie_id", fk("title", Some("production_year"), 1.0, 0.0)),
            col(
                "info_type_id",
                from_parent(
                    "kind_id",
                    IntMap {
                        offset: 98.0,
                        jitter: 1,
                        clamp: Some((99, 113)),
                        noise: 0.1,
                        noise_range: (99, 113),
                        ..IntMap::default()
                    },
                ),
            ),
        ],
    };
    DatasetSpec {
        seed,
        tables: vec![title, movie_companies, cast_info, movie_info, movie_keyword, movie_info_idx],
    }
}
