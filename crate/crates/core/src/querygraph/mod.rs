//! Attributed query DAGs, the SQL front end that builds them, and subquery
//! enumeration.
//!
//! Edges point from inputs towards the predicate root: `table -> alias ->
//! column -> op -> ... -> root`. The order of an op node's in-edges in the
//! edge list is its operand order; hashing ignores it but the executor and
//! the heuristic estimator rely on it.

mod build;
mod sql;
mod subquery;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use build::parse_sql;
pub use sql::{parse_statement, split_statements, Comparison, Expr, FromItem, Literal, Statement};
pub use subquery::{enumerate_subqueries, top_level_conjuncts, SubqueryRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Table,
    Alias,
    Column,
    Literal,
    Op,
    Function,
    Join,
    Scan,
}

impl NodeType {
    pub const ALL: [NodeType; 8] = [
        NodeType::Table,
        NodeType::Alias,
        NodeType::Column,
        NodeType::Literal,
        NodeType::Op,
        NodeType::Function,
        NodeType::Join,
        NodeType::Scan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::Table => "table",
            NodeType::Alias => "alias",
            NodeType::Column => "column",
            NodeType::Literal => "literal",
            NodeType::Op => "op",
            NodeType::Function => "function",
            NodeType::Join => "join",
            NodeType::Scan => "scan",
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttrName {
    Name,
    Type,
    NumUniques,
    Value,
    Code,
}

impl AttrName {
    pub fn as_str(self) -> &'static str {
        match self {
            AttrName::Name => "name",
            AttrName::Type => "type",
            AttrName::NumUniques => "numUniques",
            AttrName::Value => "value",
            AttrName::Code => "code",
        }
    }
}

/// A `(node type, attribute name)` pair from the registered universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttrKey {
    pub node_type: NodeType,
    pub attr: AttrName,
}

impl AttrKey {
    pub const TABLE_NAME: AttrKey = AttrKey::new(NodeType::Table, AttrName::Name);
    pub const ALIAS_NAME: AttrKey = AttrKey::new(NodeType::Alias, AttrName::Name);
    pub const COLUMN_NAME: AttrKey = AttrKey::new(NodeType::Column, AttrName::Name);
    pub const COLUMN_TYPE: AttrKey = AttrKey::new(NodeType::Column, AttrName::Type);
    pub const COLUMN_NUM_UNIQUES: AttrKey = AttrKey::new(NodeType::Column, AttrName::NumUniques);
    pub const LITERAL_TYPE: AttrKey = AttrKey::new(NodeType::Literal, AttrName::Type);
    pub const LITERAL_VALUE: AttrKey = AttrKey::new(NodeType::Literal, AttrName::Value);
    pub const OP_CODE: AttrKey = AttrKey::new(NodeType::Op, AttrName::Code);
    pub const FUNCTION_NAME: AttrKey = AttrKey::new(NodeType::Function, AttrName::Name);

    /// The full registered attribute universe, in its canonical order.
    pub const REGISTERED: [AttrKey; 9] = [
        AttrKey::TABLE_NAME,
        AttrKey::ALIAS_NAME,
        AttrKey::COLUMN_NAME,
        AttrKey::COLUMN_TYPE,
        AttrKey::COLUMN_NUM_UNIQUES,
        AttrKey::LITERAL_TYPE,
        AttrKey::LITERAL_VALUE,
        AttrKey::OP_CODE,
        AttrKey::FUNCTION_NAME,
    ];

    pub const fn new(node_type: NodeType, attr: AttrName) -> Self {
        AttrKey { node_type, attr }
    }

    pub fn is_registered(&self) -> bool {
        AttrKey::REGISTERED.contains(self)
    }
}

impl fmt::Display for AttrKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node_type, self.attr.as_str())
    }
}

impl FromStr for AttrKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttrKey::REGISTERED
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unregistered attribute key `{s}`")))
    }
}

impl Serialize for AttrKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttrKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub ty: NodeType,
    attrs: Vec<(AttrName, String)>,
}

impl Node {
    pub fn new(ty: NodeType) -> Self {
        Node {
            ty,
            attrs: Vec::new(),
        }
    }

    pub fn with(mut self, attr: AttrName, value: impl Into<String>) -> Self {
        self.set(attr, value);
        self
    }

    pub fn set(&mut self, attr: AttrName, value: impl Into<String>) {
        let value = value.into();
        match self.attrs.binary_search_by_key(&attr, |(a, _)| *a) {
            Ok(i) => self.attrs[i].1 = value,
            Err(i) => self.attrs.insert(i, (attr, value)),
        }
    }

    /// Attribute value; absent attributes read as the empty string.
    pub fn get(&self, attr: AttrName) -> &str {
        self.attrs
            .binary_search_by_key(&attr, |(a, _)| *a)
            .map(|i| self.attrs[i].1.as_str())
            .unwrap_or("")
    }

    pub fn attrs(&self) -> impl Iterator<Item = (AttrName, &str)> {
        self.attrs.iter().map(|(a, v)| (*a, v.as_str()))
    }
}

/// A typed, attributed DAG of a query or subquery. Node ids are `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDag {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    root: usize,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

impl QueryDag {
    /// Validates endpoints and acyclicity.
    pub fn new(nodes: Vec<Node>, edges: Vec<(usize, usize)>, root: usize) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Semantic("query graph has no nodes".into()));
        }
        if root >= n {
            return Err(Error::Semantic(format!("root {root} out of range")));
        }
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(s, d) in &edges {
            if s >= n || d >= n {
                return Err(Error::Semantic(format!("edge ({s}, {d}) out of range")));
            }
            preds[d].push(s);
            succs[s].push(d);
        }
        let dag = QueryDag {
            nodes,
            edges,
            root,
            preds,
            succs,
        };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn node_type(&self, id: usize) -> NodeType {
        self.nodes[id].ty
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// `X_j[(t, a)]`: empty when the node is of another type or lacks the attribute.
    pub fn attr(&self, id: usize, key: AttrKey) -> &str {
        let node = &self.nodes[id];
        if node.ty != key.node_type {
            return "";
        }
        node.get(key.attr)
    }

    /// In-neighbours in edge-list order (operand order for op nodes).
    pub fn preds(&self, id: usize) -> &[usize] {
        &self.preds[id]
    }

    pub fn succs(&self, id: usize) -> &[usize] {
        &self.succs[id]
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.preds[id].len()
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.succs[id].len()
    }

    pub fn ids_of(&self, ty: NodeType) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.ty == ty)
            .map(|(i, _)| i)
    }

    /// Number of joins: alias count minus one.
    pub fn join_count(&self) -> usize {
        self.ids_of(NodeType::Alias).count().saturating_sub(1)
    }

    /// Table names of the aliases in this graph, one entry per alias.
    pub fn alias_tables(&self) -> Vec<&str> {
        self.ids_of(NodeType::Alias)
            .filter_map(|a| {
                self.preds(a)
                    .iter()
                    .find(|&&p| self.node_type(p) == NodeType::Table)
                    .map(|&t| self.node(t).get(AttrName::Name))
            })
            .collect()
    }

    /// Kahn's algorithm with smallest-id-first tie breaking.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        topo_sort(self.nodes.len(), |j| &self.preds[j], |j| &self.succs[j])
    }

    /// Topological order of the reversed edge set.
    pub fn reverse_topological_order(&self) -> Result<Vec<usize>> {
        topo_sort(self.nodes.len(), |j| &self.succs[j], |j| &self.preds[j])
    }

    /// Relabels node `j` as `perm[j]`, keeping the edge list order.
    pub fn relabeled(&self, perm: &[usize]) -> Result<QueryDag> {
        let n = self.nodes.len();
        if perm.len() != n {
            return Err(Error::Semantic("permutation length mismatch".into()));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Semantic("not a permutation".into()));
            }
        }
        let mut nodes = vec![Node::new(NodeType::Scan); n];
        for (j, node) in self.nodes.iter().enumerate() {
            nodes[perm[j]] = node.clone();
        }
        let edges = self.edges.iter().map(|&(s, d)| (perm[s], perm[d])).collect();
        QueryDag::new(nodes, edges, perm[self.root])
    }

    /// Copy with one node attribute replaced.
    pub fn with_attr(&self, id: usize, attr: AttrName, value: impl Into<String>) -> QueryDag {
        let mut out = self.clone();
        out.nodes[id].set(attr, value);
        out
    }
}

fn topo_sort<'a>(
    n: usize,
    preds: impl Fn(usize) -> &'a [usize],
    succs: impl Fn(usize) -> &'a [usize],
) -> Result<Vec<usize>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut indeg: Vec<usize> = (0..n).map(|j| preds(j).len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&j| indeg[j] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(j)) = ready.pop() {
        order.push(j);
        for &k in succs(j) {
            indeg[k] -= 1;
            if indeg[k] == 0 {
                ready.push(Reverse(k));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err(Error::Cycle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_cycles_and_dangling_edges() {
        let nodes = vec![Node::new(NodeType::Op), Node::new(NodeType::Op)];
        assert!(matches!(
            QueryDag::new(nodes.clone(), vec![(0, 1), (1, 0)], 1),
            Err(Error::Cycle)
        ));
        assert!(QueryDag::new(nodes, vec![(0, 2)], 1).is_err());
    }

    #[test]
    fn absent_attribute_reads_empty() {
        let dag = QueryDag::new(
            vec![Node::new(NodeType::Table).with(AttrName::Name, "movies")],
            vec![],
            0,
        )
        .unwrap();
        assert_eq!(dag.attr(0, AttrKey::TABLE_NAME), "movies");
        assert_eq!(dag.attr(0, AttrKey::COLUMN_NAME), "");
        assert_eq!(dag.attr(0, AttrKey::new(NodeType::Table, AttrName::Code)), "");
    }

    #[test]
    fn attr_key_parsing() {
        assert_eq!(
            "column.numUniques".parse::<AttrKey>().unwrap(),
            AttrKey::COLUMN_NUM_UNIQUES
        );
        assert!("column.value".parse::<AttrKey>().is_err());
        assert!("bogus".parse::<AttrKey>().is_err());
        let json = serde_json::to_string(&AttrKey::OP_CODE).unwrap();
        assert_eq!(json, "\"op.code\"");
    }

    #[test]
    fn relabel_preserves_structure() {
        let nodes = vec![
            Node::new(NodeType::Table).with(AttrName::Name, "t"),
            Node::new(NodeType::Alias).with(AttrName::Name, "t"),
            Node::new(NodeType::Scan),
        ];
        let dag = QueryDag::new(nodes, vec![(0, 1), (1, 2)], 2).unwrap();
        let perm = [2, 0, 1];
        let r = dag.relabeled(&perm).unwrap();
        assert_eq!(r.root(), 1);
        assert_eq!(r.node_type(2), NodeType::Table);
        assert_eq!(r.edges(), &[(2, 0), (0, 1)]);
        assert!(dag.relabeled(&[0, 0, 1]).is_err());
    }
}
