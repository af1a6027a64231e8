use std::collections::HashMap;

use super::sql::{parse_statement, Expr, Literal, Statement};
use super::{AttrName, Node, NodeType, QueryDag};
use crate::error::{Error, Result};
use crate::schema::{parse_date, ColumnType, Schema};

/// Parses a SELECT statement into its attributed DAG.
///
/// Table nodes are shared by name, column nodes by `(alias, column)`, and
/// every column hangs below its alias: `table -> alias -> column`. Literal
/// operands are moved to the right of comparisons (flipping the operator) and
/// column-column comparisons are ordered by `(table, column)`, so the op code
/// alone determines the comparison direction.
pub fn parse_sql(text: &str, schema: Option<&Schema>) -> Result<QueryDag> {
    let stmt = parse_statement(text)?;
    GraphBuilder::new(&stmt, schema)?.finish(stmt.predicate.as_ref())
}

struct AliasInfo {
    name: String,
    table: String,
    node: usize,
}

struct GraphBuilder<'s> {
    schema: Option<&'s Schema>,
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    aliases: Vec<AliasInfo>,
    columns: HashMap<(usize, String), usize>,
}

/// A column operand resolved against the FROM list.
struct ColumnRef {
    alias: usize,
    name: String,
    ty: Option<ColumnType>,
}

impl<'s> GraphBuilder<'s> {
    fn new(stmt: &Statement, schema: Option<&'s Schema>) -> Result<Self> {
        let mut b = GraphBuilder {
            schema,
            nodes: Vec::new(),
            edges: Vec::new(),
            aliases: Vec::new(),
            columns: HashMap::new(),
        };
        let mut tables: HashMap<&str, usize> = HashMap::new();
        for item in &stmt.from {
            if b.aliases.iter().any(|a| a.name == item.alias) {
                return Err(Error::Semantic(format!("duplicate alias `{}`", item.alias)));
            }
            if let Some(s) = schema {
                if !s.has_table(&item.table) {
                    return Err(Error::Semantic(format!("unknown table `{}`", item.table)));
                }
            }
            let table_node = match tables.get(item.table.as_str()) {
                Some(&id) => id,
                None => {
                    let id = b.add(Node::new(NodeType::Table).with(AttrName::Name, &item.table));
                    tables.insert(&item.table, id);
                    id
                }
            };
            let alias_node = b.add(Node::new(NodeType::Alias).with(AttrName::Name, &item.alias));
            b.edges.push((table_node, alias_node));
            b.aliases.push(AliasInfo {
                name: item.alias.clone(),
                table: item.table.clone(),
                node: alias_node,
            });
        }
        Ok(b)
    }

    fn add(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn finish(mut self, predicate: Option<&Expr>) -> Result<QueryDag> {
        let root = match predicate {
            Some(p) => self.expr(p)?,
            None => {
                let kind = if self.aliases.len() == 1 {
                    NodeType::Scan
                } else {
                    NodeType::Join
                };
                let root = self.add(Node::new(kind));
                for a in 0..self.aliases.len() {
                    self.edges.push((self.aliases[a].node, root));
                }
                root
            }
        };
        QueryDag::new(self.nodes, self.edges, root)
    }

    fn resolve(&self, qualifier: Option<&str>, name: &str, pos: usize) -> Result<ColumnRef> {
        let alias = match qualifier {
            Some(q) => self
                .aliases
                .iter()
                .position(|a| a.name == q)
                .or_else(|| {
                    let mut hits = self.aliases.iter().enumerate().filter(|(_, a)| a.table == q);
                    match (hits.next(), hits.next()) {
                        (Some((i, _)), None) => Some(i),
                        _ => None,
                    }
                })
                .ok_or_else(|| {
                    Error::Semantic(format!("unknown table or alias `{q}` at byte {pos}"))
                })?,
            None if self.aliases.len() == 1 => 0,
            None => {
                let Some(schema) = self.schema else {
                    return Err(Error::Semantic(format!(
                        "ambiguous column `{name}` at byte {pos}: qualify it or bind a schema"
                    )));
                };
                let hits: Vec<usize> = (0..self.aliases.len())
                    .filter(|&i| schema.column(&self.aliases[i].table, name).is_some())
                    .collect();
                match hits.as_slice() {
                    [one] => *one,
                    [] => {
                        return Err(Error::Semantic(format!("unknown column `{name}` at byte {pos}")))
                    }
                    _ => {
                        return Err(Error::Semantic(format!(
                            "ambiguous column `{name}` at byte {pos}"
                        )))
                    }
                }
            }
        };
        let ty = match self.schema {
            Some(schema) => {
                let table = &self.aliases[alias].table;
                let stats = schema.column(table, name).ok_or_else(|| {
                    Error::Semantic(format!("unknown column `{table}.{name}` at byte {pos}"))
                })?;
                Some(stats.ty)
            }
            None => None,
        };
        Ok(ColumnRef {
            alias,
            name: name.to_string(),
            ty,
        })
    }

    fn column_node(&mut self, col: &ColumnRef) -> usize {
        if let Some(&id) = self.columns.get(&(col.alias, col.name.clone())) {
            return id;
        }
        let mut node = Node::new(NodeType::Column).with(AttrName::Name, &col.name);
        if let Some(schema) = self.schema {
            if let Some(stats) = schema.column(&self.aliases[col.alias].table, &col.name) {
                node.set(AttrName::Type, stats.ty.as_str());
                node.set(AttrName::NumUniques, stats.num_uniques.to_string());
            }
        }
        let id = self.add(node);
        self.edges.push((self.aliases[col.alias].node, id));
        self.columns.insert((col.alias, col.name.clone()), id);
        id
    }

    fn literal_node(&mut self, lit: &Literal, context: Option<ColumnType>) -> usize {
        let (value, ty) = literal_text(lit, context);
        self.add(
            Node::new(NodeType::Literal)
                .with(AttrName::Value, value)
                .with(AttrName::Type, ty),
        )
    }

    fn op_node(&mut self, code: &str, inputs: &[usize]) -> usize {
        let id = self.add(Node::new(NodeType::Op).with(AttrName::Code, code));
        self.edges.extend(inputs.iter().map(|&i| (i, id)));
        id
    }

    /// Column type carried by an operand, if it is a plain column.
    fn operand_type(&self, e: &Expr) -> Result<Option<ColumnType>> {
        match e {
            Expr::Column {
                qualifier,
                name,
                pos,
            } => Ok(self.resolve(qualifier.as_deref(), name, *pos)?.ty),
            _ => Ok(None),
        }
    }

    fn sort_key(&self, e: &Expr) -> Result<Option<(String, String)>> {
        match e {
            Expr::Column {
                qualifier,
                name,
                pos,
            } => {
                let c = self.resolve(qualifier.as_deref(), name, *pos)?;
                Ok(Some((self.aliases[c.alias].table.clone(), c.name)))
            }
            _ => Ok(None),
        }
    }

    fn operand(&mut self, e: &Expr, context: Option<ColumnType>) -> Result<usize> {
        match e {
            Expr::Literal(l) => Ok(self.literal_node(l, context)),
            _ => self.expr(e),
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<usize> {
        match e {
            Expr::Column {
                qualifier,
                name,
                pos,
            } => {
                let c = self.resolve(qualifier.as_deref(), name, *pos)?;
                Ok(self.column_node(&c))
            }
            Expr::Literal(l) => Ok(self.literal_node(l, None)),
            Expr::Function { name, args } => {
                let inputs = args
                    .iter()
                    .map(|a| self.operand(a, None))
                    .collect::<Result<Vec<_>>>()?;
                let id = self.add(Node::new(NodeType::Function).with(AttrName::Name, name));
                self.edges.extend(inputs.iter().map(|&i| (i, id)));
                Ok(id)
            }
            Expr::Compare { op, left, right } => {
                let (mut op, mut left, mut right) = (*op, left.as_ref(), right.as_ref());
                let swap = match (left, right) {
                    (Expr::Literal(_), r) => !matches!(r, Expr::Literal(_)),
                    (Expr::Column { .. }, Expr::Column { .. }) => {
                        self.sort_key(left)? > self.sort_key(right)?
                    }
                    _ => false,
                };
                if swap {
                    std::mem::swap(&mut left, &mut right);
                    op = op.flipped();
                }
                let left_ty = self.operand_type(left)?;
                let right_ty = self.operand_type(right)?;
                let l = self.operand(left, right_ty)?;
                let r = self.operand(right, left_ty)?;
                Ok(self.op_node(op.code(), &[l, r]))
            }
            Expr::InList { expr, list } => {
                let ty = self.operand_type(expr)?;
                let mut inputs = vec![self.expr(expr)?];
                for lit in list {
                    inputs.push(self.literal_node(lit, ty));
                }
                Ok(self.op_node("IN", &inputs))
            }
            Expr::And(items) | Expr::Or(items) => {
                let code = if matches!(e, Expr::And(_)) { "AND" } else { "OR" };
                let inputs = items
                    .iter()
                    .map(|i| self.expr(i))
                    .collect::<Result<Vec<_>>>()?;
                Ok(self.op_node(code, &inputs))
            }
            Expr::Not(inner) => {
                let i = self.expr(inner)?;
                Ok(self.op_node("NOT", &[i]))
            }
        }
    }
}

/// Canonical value text and type tag of a literal; string literals compared
/// against a date column become dates.
pub(crate) fn literal_text(lit: &Literal, context: Option<ColumnType>) -> (String, &'static str) {
    match lit {
        Literal::Int(v) => (v.to_string(), "int"),
        Literal::Float(v) => (v.to_string(), "float"),
        Literal::Date(s) => (s.clone(), "date"),
        Literal::Str(s) if context == Some(ColumnType::Date) && parse_date(s).is_some() => {
            (s.trim().to_string(), "date")
        }
        Literal::Str(s) => (s.clone(), "string"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygraph::AttrKey;
    use crate::schema::ColumnStats;

    fn count(dag: &QueryDag, ty: NodeType) -> usize {
        dag.ids_of(ty).count()
    }

    #[test]
    fn figure_query_shape() {
        let dag = parse_sql("SELECT * FROM movies WHERE stars>3 AND year IN (2024,2025)", None).unwrap();
        assert_eq!(dag.len(), 10);
        assert_eq!(dag.edges().len(), 10);
        assert_eq!(count(&dag, NodeType::Table), 1);
        assert_eq!(count(&dag, NodeType::Alias), 1);
        assert_eq!(count(&dag, NodeType::Column), 2);
        assert_eq!(count(&dag, NodeType::Op), 3);
        assert_eq!(count(&dag, NodeType::Literal), 3);
        let mut values: Vec<&str> = dag
            .ids_of(NodeType::Literal)
            .map(|j| dag.attr(j, AttrKey::LITERAL_VALUE))
            .collect();
        values.sort();
        assert_eq!(values, ["2024", "2025", "3"]);
        let root = dag.root();
        assert_eq!(dag.attr(root, AttrKey::OP_CODE), "AND");
        assert_eq!(dag.out_degree(root), 0);
    }

    #[test]
    fn bare_scan() {
        let dag = parse_sql("SELECT * FROM t", None).unwrap();
        assert_eq!(dag.len(), 3);
        assert_eq!(dag.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(dag.node_type(dag.root()), NodeType::Scan);
        assert_eq!(count(&dag, NodeType::Op) + count(&dag, NodeType::Literal), 0);
    }

    #[test]
    fn join_query_matches_hand_built_graph() {
        let dag = parse_sql("SELECT * FROM a, b WHERE a.k=b.k AND a.v<5", None).unwrap();
        // Hand-built expectation, ids in creation order.
        let expected_nodes: Vec<(NodeType, &str)> = vec![
            (NodeType::Table, "a"),
            (NodeType::Alias, "a"),
            (NodeType::Table, "b"),
            (NodeType::Alias, "b"),
            (NodeType::Column, "k"),
            (NodeType::Column, "k"),
            (NodeType::Op, "="),
            (NodeType::Column, "v"),
            (NodeType::Literal, "5"),
            (NodeType::Op, "<"),
            (NodeType::Op, "AND"),
        ];
        let expected_edges = vec![
            (0, 1),
            (2, 3),
            (1, 4),
            (3, 5),
            (4, 6),
            (5, 6),
            (1, 7),
            (7, 9),
            (8, 9),
            (6, 10),
            (9, 10),
        ];
        assert_eq!(dag.len(), expected_nodes.len());
        for (j, (ty, label)) in expected_nodes.iter().enumerate() {
            assert_eq!(dag.node_type(j), *ty, "node {j}");
            let shown = dag
                .node(j)
                .attrs()
                .find(|(a, _)| matches!(a, AttrName::Name | AttrName::Code | AttrName::Value))
                .map(|(_, v)| v)
                .unwrap();
            assert_eq!(shown, *label, "node {j}");
        }
        let mut got = dag.edges().to_vec();
        let mut want = expected_edges.clone();
        got.sort();
        want.sort();
        assert_eq!(got, want);
        // Both tables reach the shared `=` node through their columns.
        assert_eq!(dag.preds(6), &[4, 5]);
    }

    #[test]
    fn literal_on_left_is_normalized() {
        let a = parse_sql("SELECT * FROM t WHERE 3 < x", None).unwrap();
        let b = parse_sql("SELECT * FROM t WHERE x > 3", None).unwrap();
        let op = a.root();
        assert_eq!(a.attr(op, AttrKey::OP_CODE), ">");
        assert_eq!(a.node_type(a.preds(op)[0]), NodeType::Column);
        assert_eq!(b.attr(b.root(), AttrKey::OP_CODE), ">");
    }

    #[test]
    fn column_comparisons_are_ordered_by_table() {
        let dag = parse_sql("SELECT * FROM b, a WHERE b.x < a.y", None).unwrap();
        let op = dag.root();
        assert_eq!(dag.attr(op, AttrKey::OP_CODE), ">");
        let first = dag.preds(op)[0];
        assert_eq!(dag.attr(first, AttrKey::COLUMN_NAME), "y");
    }

    #[test]
    fn self_join_keeps_aliases_apart() {
        let dag = parse_sql("SELECT * FROM t x, t y WHERE x.id = y.id", None).unwrap();
        assert_eq!(count(&dag, NodeType::Table), 1);
        assert_eq!(count(&dag, NodeType::Alias), 2);
        assert_eq!(count(&dag, NodeType::Column), 2);
    }

    fn schema() -> Schema {
        let mut s = Schema::default();
        let col = |ty| ColumnStats {
            ty,
            min: None,
            max: None,
            num_uniques: 7,
            table_size: 100,
        };
        let t = s.tables.entry("movies".into()).or_default();
        t.insert("stars".into(), col(ColumnType::Int));
        t.insert("released".into(), col(ColumnType::Date));
        s.tables
            .entry("cast".into())
            .or_default()
            .insert("movie_id".into(), col(ColumnType::Int));
        s
    }

    #[test]
    fn schema_binding() {
        let s = schema();
        let dag = parse_sql(
            "SELECT * FROM movies m, cast c WHERE stars = 1 AND movie_id = 2 AND released > '2020-01-01'",
            Some(&s),
        )
        .unwrap();
        let col = dag
            .ids_of(NodeType::Column)
            .find(|&j| dag.attr(j, AttrKey::COLUMN_NAME) == "stars")
            .unwrap();
        assert_eq!(dag.attr(col, AttrKey::COLUMN_TYPE), "int");
        assert_eq!(dag.attr(col, AttrKey::COLUMN_NUM_UNIQUES), "7");
        let date_lit = dag
            .ids_of(NodeType::Literal)
            .find(|&j| dag.attr(j, AttrKey::LITERAL_VALUE) == "2020-01-01")
            .unwrap();
        assert_eq!(dag.attr(date_lit, AttrKey::LITERAL_TYPE), "date");

        let err = parse_sql("SELECT * FROM nope", Some(&s)).unwrap_err();
        assert!(matches!(err, Error::Semantic(_)));
        let err = parse_sql("SELECT * FROM movies WHERE bogus = 1", Some(&s)).unwrap_err();
        assert!(matches!(err, Error::Semantic(_)));
        let err = parse_sql("SELECT * FROM movies m, cast c WHERE x = 1", None).unwrap_err();
        assert!(matches!(err, Error::Semantic(_)));
        let err = parse_sql("SELECT * FROM movies m, cast m", None).unwrap_err();
        assert!(matches!(err, Error::Semantic(_)));
    }

    #[test]
    fn parsing_is_deterministic() {
        let q = "SELECT * FROM a, b WHERE a.k=b.k AND (a.v<5 OR a.w IN ('x','y'))";
        assert_eq!(parse_sql(q, None).unwrap(), parse_sql(q, None).unwrap());
    }
}
