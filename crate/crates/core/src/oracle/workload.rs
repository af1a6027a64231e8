//! Parameterized query templates and the seeded workload generator.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset};
use crate::error::{Error, Result};
use crate::querygraph::{parse_sql, split_statements};
use crate::schema::{format_date, parse_date, Schema};

/// Produces the SQL text substituted for one `{param}` placeholder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    UniformInt {
        lo: i64,
        hi: i64,
    },
    UniformFloat {
        lo: f64,
        hi: f64,
        #[serde(default = "default_decimals")]
        decimals: usize,
    },
    /// Quoted ISO date, uniform in `[start, end]`.
    UniformDate {
        start: String,
        end: String,
    },
    /// One of the given SQL literals.
    Choice {
        values: Vec<String>,
    },
    /// `size` distinct values, comma separated, in list order.
    ChoiceSubset {
        values: Vec<String>,
        size: usize,
    },
    /// Uniform over the observed `[min, max]` of a numeric or date column.
    ColumnRange {
        table: String,
        column: String,
    },
    /// The value of a uniformly drawn row, so frequent values come up often.
    ColumnValue {
        table: String,
        column: String,
    },
}

fn default_decimals() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplate {
    #[serde(default)]
    pub name: String,
    pub sql: String,
    #[serde(default)]
    pub params: BTreeMap<String, Sampler>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub seed: u64,
    pub queries_per_template: usize,
    /// Interleave templates; otherwise queries come template by template.
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
    pub templates: Vec<QueryTemplate>,
}

fn default_shuffle() -> bool {
    true
}

impl WorkloadSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}

fn placeholders(sql: &str) -> Result<Vec<(usize, usize, &str)>> {
    let mut out = Vec::new();
    let bytes = sql.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let end = sql[i..]
                .find('}')
                .map(|e| i + e)
                .ok_or_else(|| Error::Config(format!("unclosed placeholder in `{sql}`")))?;
            out.push((i, end + 1, sql[i + 1..end].trim()));
            i = end + 1;
        } else {
            i += 1;
        }
    }
    Ok(out)
}

fn column<'a>(data: Option<&'a Dataset>, table: &str, col: &str) -> Result<&'a ColumnData> {
    let data = data.ok_or_else(|| Error::Config(format!("sampler over `{table}.{col}` needs a dataset")))?;
    let c = data
        .table(table)
        .and_then(|t| t.column(col))
        .ok_or_else(|| Error::Config(format!("unknown column `{table}.{col}`")))?;
    if c.is_empty() {
        return Err(Error::Config(format!("column `{table}.{col}` is empty")));
    }
    Ok(c)
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

impl Sampler {
    pub fn sample(&self, rng: &mut ChaCha8Rng, data: Option<&Dataset>) -> Result<String> {
        Ok(match self {
            Sampler::UniformInt { lo, hi } => rng.gen_range(*lo.min(hi)..=*hi.max(lo)).to_string(),
            Sampler::UniformFloat { lo, hi, decimals } => {
                let v = if lo < hi { rng.gen_range(*lo..*hi) } else { *lo };
                format!("{v:.decimals$}")
            }
            Sampler::UniformDate { start, end } => {
                let bad = |s: &str| Error::Config(format!("bad date `{s}`"));
                let a = parse_date(start).ok_or_else(|| bad(start))?;
                let b = parse_date(end).ok_or_else(|| bad(end))?;
                quote(&format_date(rng.gen_range(a.min(b)..=b.max(a))))
            }
            Sampler::Choice { values } => values
                .choose(rng)
                .cloned()
                .ok_or_else(|| Error::Config("empty choice list".into()))?,
            Sampler::ChoiceSubset { values, size } => {
                if *size == 0 || *size > values.len() {
                    return Err(Error::Config(format!(
                        "subset of {size} from {} values",
                        values.len()
                    )));
                }
                let mut picked = index::sample(rng, values.len(), *size).into_vec();
                picked.sort_unstable();
                picked.iter().map(|&i| values[i].as_str()).collect::<Vec<_>>().join(", ")
            }
            Sampler::ColumnRange { table, column: col } => match column(data, table, col)? {
                ColumnData::Int(v) => {
                    let (lo, hi) = min_max(v);
                    rng.gen_range(lo..=hi).to_string()
                }
                ColumnData::Date(v) => {
                    let (lo, hi) = min_max(v);
                    quote(&format_date(rng.gen_range(lo..=hi)))
                }
                ColumnData::Float(v) => {
                    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let x = if lo < hi { rng.gen_range(lo..hi) } else { lo };
                    format!("{x:.2}")
                }
                ColumnData::Str(_) => {
                    return Err(Error::Config(format!("`{table}.{col}` has no numeric range")))
                }
            },
            Sampler::ColumnValue { table, column: col } => {
                let c = column(data, table, col)?;
                let row = rng.gen_range(0..c.len());
                match c {
                    ColumnData::Int(v) => v[row].to_string(),
                    ColumnData::Float(v) => v[row].to_string(),
                    ColumnData::Str(v) => quote(&v[row]),
                    ColumnData::Date(v) => quote(&format_date(v[row])),
                }
            }
        })
    }
}

fn min_max<T: Copy + Ord>(v: &[T]) -> (T, T) {
    (*v.iter().min().unwrap(), *v.iter().max().unwrap())
}

impl QueryTemplate {
    /// Substitutes one sample per placeholder. Parameters are drawn in name
    /// order so the stream does not depend on placeholder positions.
    pub fn render(&self, rng: &mut ChaCha8Rng, data: Option<&Dataset>) -> Result<String> {
        let mut values = BTreeMap::new();
        for (name, sampler) in &self.params {
            values.insert(name.as_str(), sampler.sample(rng, data)?);
        }
        let mut out = String::with_capacity(self.sql.len() + 32);
        let mut last = 0;
        for (start, end, name) in placeholders(&self.sql)? {
            let v = values.get(name).ok_or_else(|| {
                Error::Config(format!("template `{}` has no sampler for `{name}`", self.name))
            })?;
            out.push_str(&self.sql[last..start]);
            out.push_str(v);
            last = end;
        }
        out.push_str(&self.sql[last..]);
        Ok(out)
    }
}

/// Renders `queries_per_template` queries from every template; the result
/// depends only on the spec (and the dataset for column samplers).
pub fn generate_workload(spec: &WorkloadSpec, data: Option<&Dataset>) -> Result<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.templates.len() * spec.queries_per_template);
    for t in &spec.templates {
        for _ in 0..spec.queries_per_template {
            out.push(t.render(&mut rng, data)?);
        }
    }
    if spec.shuffle {
        out.shuffle(&mut rng);
    }
    Ok(out)
}

/// Checks that every placeholder has a sampler (and vice versa) and that a
/// rendered instance of each template binds against `schema`.
pub fn validate_workload(spec: &WorkloadSpec, data: Option<&Dataset>, schema: &Schema) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for t in &spec.templates {
        let used: BTreeSet<&str> = placeholders(&t.sql)?.into_iter().map(|p| p.2).collect();
        if let Some(extra) = t.params.keys().find(|k| !used.contains(k.as_str())) {
            return Err(Error::Config(format!("template `{}`: unused parameter `{extra}`", t.name)));
        }
        let sql = t.render(&mut rng, data)?;
        parse_sql(&sql, Some(schema)).map_err(|e| Error::Config(format!("template `{}`: {e}", t.name)))?;
    }
    Ok(())
}

/// One statement per line, each terminated by `;`.
pub fn write_sql(queries: &[String], path: &Path) -> Result<()> {
    let mut text = String::new();
    for q in queries {
        text.push_str(q.trim().trim_end_matches(';'));
        text.push_str(";\n");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_sql(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(split_statements(&text)
        .into_iter()
        .map(|s| s.trim().trim_end_matches(';').trim_end().to_string())
        .filter(|s| !s.is_empty())
        .collect())
}

struct Pred {
    sql: &'static str,
    sampler: fn() -> Sampler,
}

macro_rules! pred {
    ($sql:expr, range $t:expr, $c:expr) => {
        Pred {
            sql: $sql,
            sampler: || Sampler::ColumnRange {
                table: $t.into(),
                column: $c.into(),
            },
        }
    };
    ($sql:expr, value $t:expr, $c:expr) => {
        Pred {
            sql: $sql,
            sampler: || Sampler::ColumnValue {
                table: $t.into(),
                column: $c.into(),
            },
        }
    };
}

fn title_preds() -> Vec<Pred> {
    vec![
        pred!("t.production_year > {p}", range "title", "production_year"),
        pred!("t.production_year < {p}", range "title", "production_year"),
        pred!("t.kind_id = {p}", value "title", "kind_id"),
        Pred {
            sql: "t.kind_id IN ({p})",
            sampler: || Sampler::ChoiceSubset {
                values: (1..=7).map(|k| k.to_string()).collect(),
                size: 2,
            },
        },
        pred!("t.genre = {p}", value "title", "genre"),
        pred!("t.release_date >= {p}", range "title", "release_date"),
    ]
}

/// `(table, alias, predicates)` of the tables joined to `title`.
fn fact_tables() -> Vec<(&'static str, &'static str, Vec<Pred>)> {
    vec![
        (
            "movie_companies",
            "mc",
            vec![
                pred!("mc.company_type_id = {p}", value "movie_companies", "company_type_id"),
                pred!("mc.company_id < {p}", range "movie_companies", "company_id"),
            ],
        ),
        (
            "cast_info",
            "ci",
            vec![
                pred!("ci.role_id = {p}", value "cast_info", "role_id"),
                pred!("ci.person_id > {p}", range "cast_info", "person_id"),
            ],
        ),
        (
            "movie_info",
            "mi",
            vec![
                pred!("mi.info_type_id = {p}", value "movie_info", "info_type_id"),
                pred!("mi.info_type_id < {p}", range "movie_info", "info_type_id"),
            ],
        ),
        (
            "movie_keyword",
            "mk",
            vec![
                pred!("mk.keyword_id > {p}", range "movie_keyword", "keyword_id"),
                pred!("mk.keyword_id < {p}", range "movie_keyword", "keyword_id"),
            ],
        ),
        (
            "movie_info_idx",
            "mi_idx",
            vec![
                pred!("mi_idx.info_type_id = {p}", value "movie_info_idx", "info_type_id"),
                pred!("mi_idx.info_type_id > {p}", range "movie_info_idx", "info_type_id"),
            ],
        ),
    ]
}

/// Templates per join count (1 to 4 joins), 40 in total.
const TEMPLATES_PER_JOIN_COUNT: [usize; 4] = [12, 14, 10, 4];

/// Star-join templates over the standard dataset: `title` joined to one to
/// four of the other tables, with filters on most of them.
pub fn standard_templates() -> Vec<QueryTemplate> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a6f62);
    let title = title_preds();
    let facts = fact_tables();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (j, &count) in TEMPLATES_PER_JOIN_COUNT.iter().enumerate() {
        let joins = j + 1;
        let mut made = 0;
        while made < count {
            let mut chosen = index::sample(&mut rng, facts.len(), joins).into_vec();
            chosen.sort_unstable();
            let n_title = if joins >= 3 || rng.gen_bool(0.5) { 1 } else { 2 };
            let mut tp = index::sample(&mut rng, title.len(), n_title).into_vec();
            tp.sort_unstable();
            // `kind_id =` together with `kind_id IN` says nothing new.
            if tp == [2, 3] {
                continue;
            }
            let fp: Vec<Option<usize>> = chosen
                .iter()
                .map(|&f| rng.gen_bool(0.75).then(|| rng.gen_range(0..facts[f].2.len())))
                .collect();
            if !seen.insert((chosen.clone(), tp.clone(), fp.clone())) {
                continue;
            }
            let mut from = vec!["title t".to_string()];
            let mut conds = Vec::new();
            let mut params = BTreeMap::new();
            for &f in &chosen {
                let (table, alias, _) = &facts[f];
                from.push(format!("{table} {alias}"));
                conds.push(format!("t.id = {alias}.movie_id"));
            }
            let mut add = |p: &Pred| {
                let name = format!("p{}", params.len());
                conds.push(p.sql.replace("{p}", &format!("{{{name}}}")));
                params.insert(name, (p.sampler)());
            };
            for &i in &tp {
                add(&title[i]);
            }
            for (&f, p) in chosen.iter().zip(&fp) {
                if let Some(p) = p {
                    add(&facts[f].2[*p]);
                }
            }
            out.push(QueryTemplate {
                name: format!("t{:02}", out.len() + 1),
                sql: format!("SELECT COUNT(*) FROM {} WHERE {}", from.join(", "), conds.join(" AND ")),
                params,
            });
            made += 1;
        }
    }
    out
}

/// The 40-template workload over the standard dataset.
pub fn standard_workload_spec(seed: u64, queries_per_template: usize) -> WorkloadSpec {
    WorkloadSpec {
        seed,
        queries_per_template,
        shuffle: true,
        templates: standard_templates(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{make_correlated_dataset, standard_dataset_spec};

    fn small_data() -> Dataset {
        make_correlated_dataset(&standard_dataset_spec(1, 0.02)).unwrap()
    }

    #[test]
    fn forty_templates_give_five_thousand_queries() {
        let data = small_data();
        let spec = standard_workload_spec(7, 125);
        assert_eq!(spec.templates.len(), 40);
        let qs = generate_workload(&spec, Some(&data)).unwrap();
        assert_eq!(qs.len(), 5000);
        validate_workload(&spec, Some(&data), &data.schema()).unwrap();
    }

    #[test]
    fn seeds_control_the_literals() {
        let data = small_data();
        let a = generate_workload(&standard_workload_spec(1, 5), Some(&data)).unwrap();
        let b = generate_workload(&standard_workload_spec(1, 5), Some(&data)).unwrap();
        let c = generate_workload(&standard_workload_spec(2, 5), Some(&data)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn render_and_samplers() {
        let t = QueryTemplate {
            name: "x".into(),
            sql: "SELECT COUNT(*) FROM m WHERE a IN ({s}) AND d < {d} AND b = {c}".into(),
            params: BTreeMap::from([
                (
                    "s".to_string(),
                    Sampler::ChoiceSubset {
                        values: vec!["1".into(), "2".into(), "3".into()],
                        size: 3,
                    },
                ),
                (
                    "d".to_string(),
                    Sampler::UniformDate {
                        start: "2020-02-02".into(),
                        end: "2020-02-02".into(),
                    },
                ),
                ("c".to_string(), Sampler::Choice { values: vec!["'z'".into()] }),
            ]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            t.render(&mut rng, None).unwrap(),
            "SELECT COUNT(*) FROM m WHERE a IN (1, 2, 3) AND d < '2020-02-02' AND b = 'z'"
        );
        let missing = QueryTemplate {
            params: BTreeMap::new(),
            ..t.clone()
        };
        assert!(matches!(missing.render(&mut rng, None), Err(Error::Config(_))));
        let needs_data = Sampler::ColumnRange {
            table: "m".into(),
            column: "a".into(),
        };
        assert!(needs_data.sample(&mut rng, None).is_err());
    }

    #[test]
    fn sql_file_roundtrip_and_spec_json() {
        let dir = tempfile::tempdir().unwrap();
        let qs = vec!["SELECT COUNT(*) FROM a".to_string(), "SELECT COUNT(*) FROM b WHERE x = 'a;b'".to_string()];
        let path = dir.path().join("w.sql");
        write_sql(&qs, &path).unwrap();
        assert_eq!(read_sql(&path).unwrap(), qs);
        let spec = standard_workload_spec(3, 2);
        let p = dir.path().join("w.json");
        spec.save(&p).unwrap();
        assert_eq!(WorkloadSpec::load(&p).unwrap(), spec);
    }
}
