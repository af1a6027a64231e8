//! Exact COUNT(*) of a query graph over an in-memory dataset.
//!
//! Each alias is filtered first, then joins are counted. Tree-shaped equi-join
//! graphs are counted by passing per-key weight messages towards the first
//! alias; anything else runs a nested loop bounded by a step budget.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use super::dataset::{ColumnData, Dataset, Table, Value};
use crate::error::{Error, Result};
use crate::querygraph::{top_level_conjuncts, AttrKey, Comparison, NodeType, QueryDag};
use crate::schema::parse_date;

pub const DEFAULT_BUDGET: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JoinStrategy {
    /// Message passing on acyclic equi-joins, nested loop otherwise.
    #[default]
    Auto,
    NestedLoop,
}

/// Counts a graph with a fresh executor.
pub fn true_cardinality(dag: &QueryDag, data: &Dataset) -> Result<u64> {
    Executor::new(data).count(dag)
}

#[derive(Debug, Clone)]
enum CExpr {
    Col { slot: usize, col: usize },
    Lit(Value),
    Func { name: String, args: Vec<CExpr> },
    Cmp { op: Comparison, l: Box<CExpr>, r: Box<CExpr> },
    In { e: Box<CExpr>, list: Vec<Value> },
    And(Vec<CExpr>),
    Or(Vec<CExpr>),
    Not(Box<CExpr>),
}

const CACHE_LIMIT: usize = 4096;

pub struct Executor<'d> {
    data: &'d Dataset,
    budget: u64,
    strategy: JoinStrategy,
    masks: HashMap<(String, String), Arc<Vec<bool>>>,
}

impl<'d> Executor<'d> {
    pub fn new(data: &'d Dataset) -> Self {
        Executor {
            data,
            budget: DEFAULT_BUDGET,
            strategy: JoinStrategy::Auto,
            masks: HashMap::new(),
        }
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_strategy(mut self, strategy: JoinStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    /// Forgets cached filter results.
    pub fn clear_cache(&mut self) {
        self.masks.clear();
    }

    pub fn count(&mut self, dag: &QueryDag) -> Result<u64> {
        let aliases: Vec<usize> = dag.ids_of(NodeType::Alias).collect();
        let tables: Vec<&'d Table> = aliases
            .iter()
            .map(|&a| {
                let t = dag
                    .preds(a)
                    .iter()
                    .find(|&&p| dag.node_type(p) == NodeType::Table)
                    .map(|&t| dag.attr(t, AttrKey::TABLE_NAME))
                    .unwrap_or("");
                self.data
                    .table(t)
                    .ok_or_else(|| Error::Schema(format!("table `{t}` is not loaded")))
            })
            .collect::<Result<_>>()?;
        let mut compiler = Compiler {
            dag,
            aliases: &aliases,
            tables: &tables,
        };
        let mut single: Vec<Vec<(String, CExpr)>> = vec![Vec::new(); aliases.len()];
        let mut multi: Vec<(u64, CExpr)> = Vec::new();
        for c in top_level_conjuncts(dag) {
            let e = compiler.compile(c)?;
            let slots = slots_of(&e);
            match slots.count_ones() {
                0 => {
                    if !truth(&e, &tables, &[]) {
                        return Ok(0);
                    }
                }
                1 => single[slots.trailing_zeros() as usize].push((render(dag, c), e)),
                _ => multi.push((slots, e)),
            }
        }

        let mut selections: Vec<Vec<u32>> = Vec::with_capacity(aliases.len());
        for (slot, table) in tables.iter().enumerate() {
            let mut keep = vec![true; table.len()];
            for (key, e) in &single[slot] {
                let m = self.mask(table, slot, key, e, aliases.len());
                keep.iter_mut().zip(m.iter()).for_each(|(k, &v)| *k &= v);
            }
            let sel: Vec<u32> = (0..table.len() as u32).filter(|&i| keep[i as usize]).collect();
            if sel.is_empty() {
                return Ok(0);
            }
            selections.push(sel);
        }
        if aliases.len() == 1 {
            return Ok(selections[0].len() as u64);
        }
        if self.strategy == JoinStrategy::Auto {
            if let Some(edges) = join_tree(&multi, aliases.len()) {
                return Ok(count_tree(&tables, &selections, &edges));
            }
        }
        self.nested_loop(&tables, &selections, &multi)
    }

    fn mask(&mut self, table: &Table, slot: usize, key: &str, e: &CExpr, n: usize) -> Arc<Vec<bool>> {
        let k = (table.name.clone(), key.to_string());
        if let Some(m) = self.masks.get(&k) {
            return m.clone();
        }
        let m = Arc::new(filter_mask(e, table, slot, n));
        if self.masks.len() >= CACHE_LIMIT {
            self.masks.clear();
        }
        self.masks.insert(k, m.clone());
        m
    }

    fn nested_loop(&self, tables: &[&Table], sel: &[Vec<u32>], multi: &[(u64, CExpr)]) -> Result<u64> {
        // Check each predicate as soon as its last alias is bound.
        let mut at_depth: Vec<Vec<&CExpr>> = vec![Vec::new(); tables.len()];
        for (slots, e) in multi {
            at_depth[63 - slots.leading_zeros() as usize].push(e);
        }
        let mut rows = vec![0usize; tables.len()];
        let mut steps = 0u64;
        let mut count = 0u64;
        let mut stack: Vec<usize> = vec![0];
        // Iterative depth-first walk; `stack[d]` is the next candidate index at depth d.
        while let Some(&pos) = stack.last() {
            let d = stack.len() - 1;
            if pos == sel[d].len() {
                stack.pop();
                if let Some(p) = stack.last_mut() {
                    *p += 1;
                }
                continue;
            }
            steps += 1;
            if steps > self.budget {
                return Err(Error::BudgetExceeded {
                    budget: self.budget,
                });
            }
            rows[d] = sel[d][pos] as usize;
            let ok = at_depth[d].iter().all(|e| truth(e, tables, &rows));
            if ok && d + 1 == tables.len() {
                count += 1;
            }
            if ok && d + 1 < tables.len() {
                stack.push(0);
            } else {
                *stack.last_mut().unwrap() += 1;
            }
        }
        Ok(count)
    }
}

struct Compiler<'a, 'd> {
    dag: &'a QueryDag,
    aliases: &'a [usize],
    tables: &'a [&'d Table],
}

impl Compiler<'_, '_> {
    fn compile(&mut self, j: usize) -> Result<CExpr> {
        let dag = self.dag;
        let preds = dag.preds(j);
        match dag.node_type(j) {
            NodeType::Column => {
                let alias = preds
                    .iter()
                    .find(|&&p| dag.node_type(p) == NodeType::Alias)
                    .ok_or_else(|| Error::Semantic("column without alias".into()))?;
                let slot = self.aliases.iter().position(|a| a == alias).unwrap();
                let name = dag.attr(j, AttrKey::COLUMN_NAME);
                let col = self.tables[slot].column_index(name).ok_or_else(|| {
                    Error::Schema(format!("`{}` has no column `{name}`", self.tables[slot].name))
                })?;
                Ok(CExpr::Col { slot, col })
            }
            NodeType::Literal => Ok(CExpr::Lit(literal_value(
                dag.attr(j, AttrKey::LITERAL_TYPE),
                dag.attr(j, AttrKey::LITERAL_VALUE),
            ))),
            NodeType::Function => {
                let name = dag.attr(j, AttrKey::FUNCTION_NAME).to_string();
                if !matches!(name.as_str(), "UPPER" | "LOWER" | "LENGTH" | "ABS" | "YEAR") {
                    return Err(Error::Unsupported(format!("function {name}")));
                }
                let args = preds.iter().map(|&p| self.compile(p)).collect::<Result<_>>()?;
                Ok(CExpr::Func { name, args })
            }
            NodeType::Op => {
                let code = dag.attr(j, AttrKey::OP_CODE);
                let mut args = preds.iter().map(|&p| self.compile(p)).collect::<Result<Vec<_>>>()?;
                if let Some(op) = Comparison::from_code(code) {
                    if args.len() != 2 {
                        return Err(Error::Semantic(format!("`{code}` needs two operands")));
                    }
                    let r = args.pop().unwrap();
                    let l = args.pop().unwrap();
                    return Ok(CExpr::Cmp {
                        op,
                        l: Box::new(l),
                        r: Box::new(r),
                    });
                }
                match code {
                    "AND" => Ok(CExpr::And(args)),
                    "OR" => Ok(CExpr::Or(args)),
                    "NOT" if args.len() == 1 => Ok(CExpr::Not(Box::new(args.pop().unwrap()))),
                    "IN" if !args.is_empty() => {
                        let e = args.remove(0);
                        let list = args
                            .into_iter()
                            .map(|a| match a {
                                CExpr::Lit(v) => Ok(v),
                                _ => Err(Error::Unsupported("non-literal IN list".into())),
                            })
                            .collect::<Result<_>>()?;
                        Ok(CExpr::In {
                            e: Box::new(e),
                            list,
                        })
                    }
                    other => Err(Error::Unsupported(format!("operator `{other}`"))),
                }
            }
            other => Err(Error::Unsupported(format!("{} node as predicate", other.as_str()))),
        }
    }
}

/// Typed value of a literal node.
pub fn literal_value(ty: &str, text: &str) -> Value {
    let parsed = match ty {
        "int" => text.parse().ok().map(Value::Int),
        "float" => text.parse().ok().map(Value::Float),
        "date" => parse_date(text).map(Value::Date),
        _ => None,
    };
    parsed.unwrap_or_else(|| Value::Str(text.to_string()))
}

fn slots_of(e: &CExpr) -> u64 {
    match e {
        CExpr::Col { slot, .. } => 1 << slot,
        CExpr::Lit(_) => 0,
        CExpr::Func { args, .. } | CExpr::And(args) | CExpr::Or(args) => {
            args.iter().fold(0, |m, a| m | slots_of(a))
        }
        CExpr::Cmp { l, r, .. } => slots_of(l) | slots_of(r),
        CExpr::In { e, .. } | CExpr::Not(e) => slots_of(e),
    }
}

/// Alias-independent text of a predicate subtree, used as a cache key.
fn render(dag: &QueryDag, j: usize) -> String {
    let inner = || {
        dag.preds(j)
            .iter()
            .map(|&p| render(dag, p))
            .collect::<Vec<_>>()
            .join(",")
    };
    match dag.node_type(j) {
        NodeType::Column => dag.attr(j, AttrKey::COLUMN_NAME).to_string(),
        NodeType::Literal => format!(
            "{}:{:?}",
            dag.attr(j, AttrKey::LITERAL_TYPE),
            dag.attr(j, AttrKey::LITERAL_VALUE)
        ),
        NodeType::Function => format!("{}({})", dag.attr(j, AttrKey::FUNCTION_NAME), inner()),
        _ => format!("{}({})", dag.attr(j, AttrKey::OP_CODE), inner()),
    }
}

fn holds(op: Comparison, ord: Ordering) -> bool {
    match op {
        Comparison::Eq => ord == Ordering::Equal,
        Comparison::Ne => ord != Ordering::Equal,
        Comparison::Lt => ord == Ordering::Less,
        Comparison::Le => ord != Ordering::Greater,
        Comparison::Gt => ord == Ordering::Greater,
        Comparison::Ge => ord != Ordering::Less,
    }
}

fn value(e: &CExpr, tables: &[&Table], rows: &[usize]) -> Option<Value> {
    match e {
        CExpr::Col { slot, col } => Some(tables[*slot].columns()[*col].1.value(rows[*slot])),
        CExpr::Lit(v) => Some(v.clone()),
        CExpr::Func { name, args } => {
            let a = value(args.first()?, tables, rows)?;
            match (name.as_str(), a) {
                ("UPPER", Value::Str(s)) => Some(Value::Str(s.to_uppercase())),
                ("LOWER", Value::Str(s)) => Some(Value::Str(s.to_lowercase())),
                ("LENGTH", Value::Str(s)) => Some(Value::Int(s.chars().count() as i64)),
                ("ABS", Value::Int(v)) => Some(Value::Int(v.abs())),
                ("ABS", Value::Float(v)) => Some(Value::Float(v.abs())),
                ("YEAR", Value::Date(d)) => {
                    Some(Value::Int(crate::schema::date_parts(&crate::schema::format_date(d))?[0] as i64))
                }
                _ => None,
            }
        }
        _ => Some(Value::Int(truth(e, tables, rows) as i64)),
    }
}

fn truth(e: &CExpr, tables: &[&Table], rows: &[usize]) -> bool {
    match e {
        CExpr::And(items) => items.iter().all(|i| truth(i, tables, rows)),
        CExpr::Or(items) => items.iter().any(|i| truth(i, tables, rows)),
        CExpr::Not(i) => !truth(i, tables, rows),
        CExpr::Cmp { op, l, r } => match (value(l, tables, rows), value(r, tables, rows)) {
            (Some(a), Some(b)) => a.compare(&b).is_some_and(|o| holds(*op, o)),
            _ => false,
        },
        CExpr::In { e, list } => value(e, tables, rows).is_some_and(|v| {
            list.iter().any(|l| v.compare(l) == Some(Ordering::Equal))
        }),
        other => matches!(value(other, tables, rows), Some(Value::Int(v)) if v != 0),
    }
}

fn ord_mask<T>(col: &[T], f: impl Fn(&T) -> Option<Ordering>, op: Comparison) -> Vec<bool> {
    col.iter().map(|x| f(x).is_some_and(|o| holds(op, o))).collect()
}

/// Vectorised comparison of a column with a constant, when the kinds allow it.
fn cmp_mask(col: &ColumnData, op: Comparison, lit: &Value) -> Option<Vec<bool>> {
    Some(match (col, lit) {
        (ColumnData::Int(v), Value::Int(c)) => ord_mask(v, |x| Some(x.cmp(c)), op),
        (ColumnData::Date(v), Value::Date(c)) => ord_mask(v, |x| Some(x.cmp(c)), op),
        (ColumnData::Date(v), Value::Str(s)) => {
            let c = parse_date(s)?;
            ord_mask(v, |x| Some(x.cmp(&c)), op)
        }
        (ColumnData::Str(v), Value::Str(c)) => ord_mask(v, |x| Some(x.as_str().cmp(c)), op),
        (ColumnData::Int(v), lit) => {
            let c = lit.as_f64()?;
            ord_mask(v, |x| (*x as f64).partial_cmp(&c), op)
        }
        (ColumnData::Float(v), lit) => {
            let c = lit.as_f64()?;
            ord_mask(v, |x| x.partial_cmp(&c), op)
        }
        _ => return None,
    })
}

fn filter_mask(e: &CExpr, table: &Table, slot: usize, n: usize) -> Vec<bool> {
    let combine = |items: &[CExpr], init: bool, f: fn(bool, bool) -> bool| {
        let mut m = vec![init; table.len()];
        for i in items {
            let sub = filter_mask(i, table, slot, n);
            m.iter_mut().zip(sub).for_each(|(a, b)| *a = f(*a, b));
        }
        m
    };
    match e {
        CExpr::And(items) => return combine(items, true, |a, b| a && b),
        CExpr::Or(items) => return combine(items, false, |a, b| a || b),
        CExpr::Not(i) => return filter_mask(i, table, slot, n).into_iter().map(|b| !b).collect(),
        CExpr::Cmp { op, l, r } => {
            let fast = match (l.as_ref(), r.as_ref()) {
                (CExpr::Col { col, .. }, CExpr::Lit(v)) => cmp_mask(&table.columns()[*col].1, *op, v),
                (CExpr::Lit(v), CExpr::Col { col, .. }) => {
                    cmp_mask(&table.columns()[*col].1, op.flipped(), v)
                }
                _ => None,
            };
            if let Some(m) = fast {
                return m;
            }
        }
        CExpr::In { e, list } => {
            if let CExpr::Col { col, .. } = e.as_ref() {
                let mut m = vec![false; table.len()];
                let mut handled = true;
                for v in list {
                    match cmp_mask(&table.columns()[*col].1, Comparison::Eq, v) {
                        Some(sub) => m.iter_mut().zip(sub).for_each(|(a, b)| *a |= b),
                        None => handled = false,
                    }
                }
                if handled {
                    return m;
                }
            }
        }
        _ => {}
    }
    let tables: Vec<&Table> = vec![table; n];
    let mut rows = vec![0usize; n];
    (0..table.len())
        .map(|i| {
            rows[slot] = i;
            truth(e, &tables, &rows)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key<'a> {
    I(i64),
    F(u64),
    S(&'a str),
}

fn key_at(col: &ColumnData, i: usize) -> Key<'_> {
    match col {
        ColumnData::Int(v) => Key::I(v[i]),
        ColumnData::Date(v) => Key::I(i64::from(v[i])),
        ColumnData::Str(v) => Key::S(&v[i]),
        ColumnData::Float(v) => {
            let x = v[i];
            if x.fract() == 0.0 && x.abs() < 9.0e15 {
                Key::I(x as i64)
            } else {
                Key::F(if x == 0.0 { 0 } else { x.to_bits() })
            }
        }
    }
}

/// Equi-join edge `(a, col_a, b, col_b)`.
type Edge = (usize, usize, usize, usize);

/// The equi-join edges when they form a spanning tree and nothing else joins.
fn join_tree(multi: &[(u64, CExpr)], n: usize) -> Option<Vec<Edge>> {
    let mut edges = Vec::new();
    for (_, e) in multi {
        match e {
            CExpr::Cmp {
                op: Comparison::Eq,
                l,
                r,
            } => match (l.as_ref(), r.as_ref()) {
                (CExpr::Col { slot: a, col: ca }, CExpr::Col { slot: b, col: cb }) if a != b => {
                    edges.push((*a, *ca, *b, *cb))
                }
                _ => return None,
            },
            _ => return None,
        }
    }
    if edges.len() != n - 1 {
        return None;
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(a, _, b, _) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return None;
        }
        parent[ra] = rb;
    }
    Some(edges)
}

enum Message<'a> {
    Dense { lo: i64, v: Vec<u128> },
    Sparse(HashMap<Key<'a>, u128>),
}

impl<'a> Message<'a> {
    fn get(&self, k: &Key<'a>) -> u128 {
        match self {
            Message::Dense { lo, v } => match *k {
                Key::I(x) if x >= *lo && x - *lo < v.len() as i64 => v[(x - *lo) as usize],
                _ => 0,
            },
            Message::Sparse(m) => m.get(k).copied().unwrap_or(0),
        }
    }
}

fn build_message<'a>(col: &'a ColumnData, sel: &[u32], w: &[u128]) -> Message<'a> {
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    let mut all_int = true;
    for &r in sel {
        match key_at(col, r as usize) {
            Key::I(x) => {
                lo = lo.min(x);
                hi = hi.max(x);
            }
            _ => {
                all_int = false;
                break;
            }
        }
    }
    if all_int && !sel.is_empty() && (hi as i128 - lo as i128) <= 2 * sel.len() as i128 + 4096 {
        let mut v = vec![0u128; (hi - lo + 1) as usize];
        for (&r, &wi) in sel.iter().zip(w) {
            if let Key::I(x) = key_at(col, r as usize) {
                let slot = &mut v[(x - lo) as usize];
                *slot = slot.saturating_add(wi);
            }
        }
        return Message::Dense { lo, v };
    }
    let mut m = HashMap::new();
    for (&r, &wi) in sel.iter().zip(w) {
        let e = m.entry(key_at(col, r as usize)).or_insert(0u128);
        *e = e.saturating_add(wi);
    }
    Message::Sparse(m)
}

fn count_tree(tables: &[&Table], sel: &[Vec<u32>], edges: &[Edge]) -> u64 {
    let n = tables.len();
    // adjacency: (neighbour, own column, neighbour column)
    let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
    for &(a, ca, b, cb) in edges {
        adj[a].push((b, ca, cb));
        adj[b].push((a, cb, ca));
    }
    let mut order = vec![0usize];
    let mut parent = vec![usize::MAX; n];
    parent[0] = 0;
    let mut i = 0;
    while i < order.len() {
        let u = order[i];
        for &(v, _, _) in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                order.push(v);
            }
        }
        i += 1;
    }
    let mut weights: Vec<Vec<u128>> = sel.iter().map(|s| vec![1u128; s.len()]).collect();
    for &c in order.iter().skip(1).rev() {
        let p = parent[c];
        let &(_, col_c, col_p) = adj[c].iter().find(|e| e.0 == p).unwrap();
        let ccol = &tables[c].columns()[col_c].1;
        let msg = build_message(ccol, &sel[c], &weights[c]);
        let pcol = &tables[p].columns()[col_p].1;
        for (k, &r) in sel[p].iter().enumerate() {
            let m = msg.get(&key_at(pcol, r as usize));
            weights[p][k] = weights[p][k].saturating_mul(m);
        }
    }
    let total = weights[0].iter().fold(0u128, |a, &b| a.saturating_add(b));
    u64::try_from(total).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygraph::parse_sql;
    use proptest::prelude::*;

    fn movies() -> Dataset {
        let mut d = Dataset::new();
        d.insert(
            Table::new(
                "movies",
                vec![
                    ("id".into(), ColumnData::Int(vec![1, 2, 3, 4, 5, 6])),
                    ("stars".into(), ColumnData::Int(vec![5, 4, 2, 5, 1, 4])),
                    ("year".into(), ColumnData::Int(vec![2024, 2023, 2025, 2025, 2024, 2020])),
                    (
                        "title".into(),
                        ColumnData::Str(["alpha", "beta", "gamma", "delta", "eps", "zeta"].map(String::from).to_vec()),
                    ),
                ],
            )
            .unwrap(),
        );
        d.insert(
            Table::new(
                "genre",
                vec![
                    ("movie_id".into(), ColumnData::Int(vec![1, 2, 3, 9])),
                    ("kind".into(), ColumnData::Int(vec![0, 1, 0, 1])),
                ],
            )
            .unwrap(),
        );
        d
    }

    fn count(d: &Dataset, sql: &str) -> u64 {
        let schema = d.schema();
        true_cardinality(&parse_sql(sql, Some(&schema)).unwrap(), d).unwrap()
    }

    #[test]
    fn figure_query_on_fixture() {
        let d = movies();
        // Rows with stars > 3: ids 1, 2, 4, 6; of those, year in {2024, 2025}: 1, 4.
        assert_eq!(count(&d, "SELECT * FROM movies WHERE stars>3 AND year IN (2024,2025)"), 2);
        assert_eq!(count(&d, "SELECT * FROM movies WHERE stars > 5"), 0);
        assert_eq!(count(&d, "SELECT * FROM movies"), 6);
        assert_eq!(count(&d, "SELECT * FROM movies WHERE NOT year IN (2024, 2025)"), 2);
        assert_eq!(count(&d, "SELECT * FROM movies WHERE stars = 1 OR title >= 'gamma'"), 3);
        assert_eq!(count(&d, "SELECT * FROM movies WHERE LENGTH(title) = 4"), 2);
        assert_eq!(count(&d, "SELECT * FROM movies WHERE 1 = 0"), 0);
    }

    #[test]
    fn key_join() {
        let d = movies();
        assert_eq!(count(&d, "SELECT * FROM genre g, movies m WHERE g.movie_id = m.id"), 3);
        assert_eq!(
            count(&d, "SELECT * FROM genre g, movies m WHERE g.movie_id = m.id AND m.stars > 3"),
            2
        );
        assert_eq!(count(&d, "SELECT * FROM genre g, movies m"), 24);
        // Non-equi join goes through the nested loop.
        assert_eq!(count(&d, "SELECT * FROM genre g, movies m WHERE g.movie_id < m.id"), 5 + 4 + 3);
    }

    #[test]
    fn budget_is_enforced() {
        let d = movies();
        let dag = parse_sql("SELECT * FROM genre g, movies m WHERE g.movie_id < m.id", None).unwrap();
        let err = Executor::new(&d).with_budget(10).count(&dag);
        assert!(matches!(err, Err(Error::BudgetExceeded { budget: 10 })));
    }

    #[test]
    fn unknown_table_is_an_error() {
        let d = movies();
        let dag = parse_sql("SELECT * FROM nope WHERE x = 1", None).unwrap();
        assert!(matches!(true_cardinality(&dag, &d), Err(Error::Schema(_))));
    }

    fn random_db(a: &[(i64, i64)], b: &[(i64, i64)], c: &[(i64, i64)]) -> Dataset {
        let mut d = Dataset::new();
        for (name, rows) in [("a", a), ("b", b), ("c", c)] {
            d.insert(
                Table::new(
                    name,
                    vec![
                        ("k".into(), ColumnData::Int(rows.iter().map(|r| r.0).collect())),
                        ("v".into(), ColumnData::Int(rows.iter().map(|r| r.1).collect())),
                    ],
                )
                .unwrap(),
            );
        }
        d
    }

    fn rows() -> impl Strategy<Value = Vec<(i64, i64)>> {
        prop::collection::vec((0i64..6, 0i64..10), 1..12)
    }

    proptest! {
        #[test]
        fn message_passing_matches_nested_loop(a in rows(), b in rows(), c in rows(), t in 0i64..10, star in any::<bool>()) {
            let d = random_db(&a, &b, &c);
            let sql = if star {
                format!("SELECT * FROM a, b, c WHERE a.k = b.k AND a.k = c.v AND b.v < {t}")
            } else {
                format!("SELECT * FROM a, b, c WHERE a.k = b.k AND b.v = c.k AND c.v >= {t}")
            };
            let dag = parse_sql(&sql, None).unwrap();
            let fast = Executor::new(&d).count(&dag).unwrap();
            let slow = Executor::new(&d).with_strategy(JoinStrategy::NestedLoop).count(&dag).unwrap();
            prop_assert_eq!(fast, slow);
        }

        #[test]
        fn counts_ignore_row_order(a in rows(), b in rows(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let d = random_db(&a, &b, &[(0, 0)]);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = Dataset::new();
            for t in d.tables() {
                let mut perm: Vec<usize> = (0..t.len()).collect();
                perm.shuffle(&mut rng);
                shuffled.insert(t.permuted(&perm));
            }
            let dag = parse_sql("SELECT * FROM a, b WHERE a.k = b.k AND a.v > 3", None).unwrap();
            prop_assert_eq!(true_cardinality(&dag, &d).unwrap(), true_cardinality(&dag, &shuffled).unwrap());
        }

        #[test]
        fn boolean_counting_laws(a in rows(), p in 0i64..10, q in 0i64..6) {
            let d = random_db(&a, &[(0, 0)], &[(0, 0)]);
            let n = |sql: String| true_cardinality(&parse_sql(&sql, None).unwrap(), &d).unwrap();
            let cp = n(format!("SELECT * FROM a WHERE v < {p}"));
            let cq = n(format!("SELECT * FROM a WHERE k = {q}"));
            let cand = n(format!("SELECT * FROM a WHERE v < {p} AND k = {q}"));
            let cor = n(format!("SELECT * FROM a WHERE v < {p} OR k = {q}"));
            prop_assert!(cand <= cp.min(cq));
            prop_assert_eq!(cor, cp + cq - cand);
        }
    }
}
