use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::schema::{format_date, parse_date, ColumnStats, ColumnType, Schema, StatValue};

/// A single cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Str(String),
    Date(i32),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Date(v) => Some(f64::from(*v)),
            Value::Str(_) => None,
        }
    }

    /// SQL-style comparison; `None` for incomparable kinds.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Date(a), Value::Date(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Date(a), Value::Str(b)) => parse_date(b).map(|b| a.cmp(&b)),
            (Value::Str(a), Value::Date(b)) => parse_date(a).map(|a| a.cmp(b)),
            (a, b) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        }
    }

    fn parse(ty: ColumnType, text: &str) -> Option<Value> {
        let t = text.trim();
        Some(match ty {
            ColumnType::Int => Value::Int(t.parse().ok()?),
            ColumnType::Float => Value::Float(t.parse().ok().filter(|v: &f64| v.is_finite())?),
            ColumnType::Date => Value::Date(parse_date(t)?),
            ColumnType::String => Value::Str(text.to_string()),
        })
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Str(v) => f.write_str(v),
            Value::Date(v) => f.write_str(&format_date(*v)),
        }
    }
}

/// A typed column.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Str(Vec<String>),
    /// Days since 1970-01-01.
    Date(Vec<i32>),
}

impl ColumnData {
    pub fn empty(ty: ColumnType) -> Self {
        match ty {
            ColumnType::Int => ColumnData::Int(Vec::new()),
            ColumnType::Float => ColumnData::Float(Vec::new()),
            ColumnType::String => ColumnData::Str(Vec::new()),
            ColumnType::Date => ColumnData::Date(Vec::new()),
        }
    }

    pub fn ty(&self) -> ColumnType {
        match self {
            ColumnData::Int(_) => ColumnType::Int,
            ColumnData::Float(_) => ColumnType::Float,
            ColumnData::Str(_) => ColumnType::String,
            ColumnData::Date(_) => ColumnType::Date,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Int(v) => v.len(),
            ColumnData::Float(v) => v.len(),
            ColumnData::Str(v) => v.len(),
            ColumnData::Date(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> Value {
        match self {
            ColumnData::Int(v) => Value::Int(v[i]),
            ColumnData::Float(v) => Value::Float(v[i]),
            ColumnData::Str(v) => Value::Str(v[i].clone()),
            ColumnData::Date(v) => Value::Date(v[i]),
        }
    }

    /// Appends a value of the column's own kind.
    pub fn push(&mut self, v: Value) -> Result<()> {
        match (self, v) {
            (ColumnData::Int(c), Value::Int(v)) => c.push(v),
            (ColumnData::Float(c), Value::Float(v)) => c.push(v),
            (ColumnData::Float(c), Value::Int(v)) => c.push(v as f64),
            (ColumnData::Str(c), Value::Str(v)) => c.push(v),
            (ColumnData::Date(c), Value::Date(v)) => c.push(v),
            (c, v) => {
                return Err(Error::Semantic(format!(
                    "cannot store {v:?} in a {} column",
                    c.ty()
                )))
            }
        }
        Ok(())
    }

    /// Reorders rows so that row `i` becomes `self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> ColumnData {
        match self {
            ColumnData::Int(v) => ColumnData::Int(perm.iter().map(|&i| v[i]).collect()),
            ColumnData::Float(v) => ColumnData::Float(perm.iter().map(|&i| v[i]).collect()),
            ColumnData::Str(v) => ColumnData::Str(perm.iter().map(|&i| v[i].clone()).collect()),
            ColumnData::Date(v) => ColumnData::Date(perm.iter().map(|&i| v[i]).collect()),
        }
    }

    fn text(&self, i: usize) -> String {
        self.value(i).to_string()
    }

    fn stats(&self, table_size: u64) -> ColumnStats {
        let (min, max, ndv) = match self {
            ColumnData::Int(v) => {
                let ndv = v.iter().collect::<HashSet<_>>().len();
                let num = |x: Option<&i64>| x.map(|&x| StatValue::Number(x as f64));
                (num(v.iter().min()), num(v.iter().max()), ndv)
            }
            ColumnData::Float(v) => {
                let ndv = v.iter().map(|x| x.to_bits()).collect::<HashSet<_>>().len();
                let min = v.iter().copied().min_by(f64::total_cmp);
                let max = v.iter().copied().max_by(f64::total_cmp);
                (min.map(StatValue::Number), max.map(StatValue::Number), ndv)
            }
            ColumnData::Str(v) => {
                let ndv = v.iter().collect::<HashSet<_>>().len();
                let text = |x: Option<&String>| x.map(|s| StatValue::Text(s.clone()));
                (text(v.iter().min()), text(v.iter().max()), ndv)
            }
            ColumnData::Date(v) => {
                let ndv = v.iter().collect::<HashSet<_>>().len();
                let text = |x: Option<&i32>| x.map(|&d| StatValue::Text(format_date(d)));
                (text(v.iter().min()), text(v.iter().max()), ndv)
            }
        };
        ColumnStats {
            ty: self.ty(),
            min,
            max,
            num_uniques: ndv as u64,
            table_size,
        }
    }
}

/// A named table of equal-length columns in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    columns: Vec<(String, ColumnData)>,
    rows: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<(String, ColumnData)>) -> Result<Self> {
        let name = name.into();
        let rows = columns.first().map_or(0, |c| c.1.len());
        if let Some((c, _)) = columns.iter().find(|c| c.1.len() != rows) {
            return Err(Error::Semantic(format!(
                "column `{c}` of `{name}` has a different length"
            )));
        }
        Ok(Table { name, columns, rows })
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn columns(&self) -> &[(String, ColumnData)] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&ColumnData> {
        self.columns.iter().find(|c| c.0 == name).map(|c| &c.1)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.0 == name)
    }

    pub fn permuted(&self, perm: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            columns: self
                .columns
                .iter()
                .map(|(n, c)| (n.clone(), c.permuted(perm)))
                .collect(),
            rows: perm.len(),
        }
    }

    pub fn stats(&self) -> BTreeMap<String, ColumnStats> {
        self.columns
            .iter()
            .map(|(n, c)| (n.clone(), c.stats(self.rows as u64)))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.columns.iter().map(|c| c.0.as_str()))?;
        for i in 0..self.rows {
            w.write_record(self.columns.iter().map(|c| c.1.text(i)))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// In-memory tables keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    tables: BTreeMap<String, Table>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: Table) {
        self.tables.insert(table.name.clone(), table);
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn sizes(&self) -> BTreeMap<String, usize> {
        self.tables.iter().map(|(n, t)| (n.clone(), t.len())).collect()
    }

    /// Schema with exact min/max/distinct statistics.
    pub fn schema(&self) -> Schema {
        Schema {
            tables: self
                .tables
                .iter()
                .map(|(n, t)| (n.clone(), t.stats()))
                .collect(),
        }
    }

    /// Writes `<dir>/<table>.csv` for every table.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for t in self.tables.values() {
            t.write_csv(&dir.join(format!("{}.csv", t.name)))?;
        }
        Ok(())
    }

    /// Loads `<dir>/<table>.csv` for every table in `schema`.
    pub fn load_csv_dir(dir: &Path, schema: &Schema) -> Result<Self> {
        let mut data = Dataset::new();
        for name in schema.tables.keys() {
            data.insert(load_csv(&dir.join(format!("{name}.csv")), name, schema)?);
        }
        Ok(data)
    }
}

/// Reads one table, typing cells by the schema. Row numbers in errors count
/// data rows from 1.
pub fn load_csv(path: &Path, table: &str, schema: &Schema) -> Result<Table> {
    let cols = schema
        .tables
        .get(table)
        .ok_or_else(|| Error::Schema(format!("unknown table `{table}`")))?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(std::io::BufReader::new(file));
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !cols.contains_key(h) {
            return Err(Error::Schema(format!("`{table}` has no column `{h}`")));
        }
        if !seen.insert(h) {
            return Err(Error::Schema(format!("duplicate column `{h}` in `{table}`")));
        }
    }
    if let Some(missing) = cols.keys().find(|c| !seen.contains(c)) {
        return Err(Error::Schema(format!("column `{missing}` missing from {}", path.display())));
    }
    let types: Vec<ColumnType> = header.iter().map(|h| cols[h].ty).collect();
    let mut data: Vec<ColumnData> = types.iter().map(|&t| ColumnData::empty(t)).collect();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Type {
                row: r + 1,
                column: header.get(rec.len()).cloned().unwrap_or_default(),
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v = Value::parse(types[c], cell).ok_or_else(|| Error::Type {
                row: r + 1,
                column: header[c].clone(),
                msg: format!("`{cell}` is not a valid {}", types[c]),
            })?;
            data[c].push(v)?;
        }
    }
    Table::new(table, header.into_iter().zip(data).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn movie_schema() -> Schema {
        let mut s = Schema::default();
        let t = s.tables.entry("movies".into()).or_default();
        let st = |ty| ColumnStats {
            ty,
            min: None,
            max: None,
            num_uniques: 0,
            table_size: 0,
        };
        t.insert("id".into(), st(ColumnType::Int));
        t.insert("year".into(), st(ColumnType::Int));
        t.insert("released".into(), st(ColumnType::Date));
        t.insert("title".into(), st(ColumnType::String));
        s
    }

    fn write(dir: &Path, body: &str) -> std::path::PathBuf {
        let p = dir.join("movies.csv");
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_typed_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "id,year,released,title\n1,2020,2020-05-01,a\n2,2021,2021-01-31,\"b, c\"\n3,2022,2022-12-24,d\n",
        );
        let t = load_csv(&p, "movies", &movie_schema()).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.column("released").unwrap().value(1), Value::Date(parse_date("2021-01-31").unwrap()));
        assert_eq!(t.column("title").unwrap().value(1), Value::Str("b, c".into()));
        let stats = t.stats();
        assert_eq!(stats["year"].num_uniques, 3);
        assert_eq!(stats["released"].min, Some(StatValue::Text("2020-05-01".into())));
    }

    #[test]
    fn malformed_cell_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "id,year,released,title\n1,2020,2020-05-01,a\n2,abc,2021-01-31,b\n");
        match load_csv(&p, "movies", &movie_schema()) {
            Err(Error::Type { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "year");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn header_must_match_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "id,year,title\n1,2,a\n");
        assert!(matches!(load_csv(&p, "movies", &movie_schema()), Err(Error::Schema(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let t = Table::new(
            "movies",
            vec![
                ("id".into(), ColumnData::Int(vec![1, 2])),
                ("year".into(), ColumnData::Int(vec![5, 6])),
                ("released".into(), ColumnData::Date(vec![0, 400])),
                ("title".into(), ColumnData::Str(vec!["x,y".into(), "\"q\"".into()])),
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut d = Dataset::new();
        d.insert(t);
        d.write_csv_dir(dir.path()).unwrap();
        let back = Dataset::load_csv_dir(dir.path(), &movie_schema()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn value_comparison() {
        assert_eq!(Value::Int(3).compare(&Value::Float(2.5)), Some(Ordering::Greater));
        assert_eq!(Value::Date(0).compare(&Value::Str("1970-01-02".into())), Some(Ordering::Less));
        assert_eq!(Value::Int(3).compare(&Value::Str("3".into())), None);
    }
}
