//! Attribute-restricted pattern hashing and canonical node ordering.
//!
//! Every node starts from a digest of its type tag, degrees and the pattern
//! attributes of its type. A forward pass in topological order folds in the
//! sorted digests of in-neighbours, then a backward pass does the same over
//! the reversed edges. Sorting the final digests gives the canonical node
//! order; the digest of the sorted rows is the pattern hash.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::querygraph::{AttrKey, NodeType, QueryDag};

/// One 256-bit hash row.
pub type Row = [u8; 32];

pub(crate) fn sha256(parts: &[&[u8]]) -> Row {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Graph-level pattern identity.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternHash(pub Row);

impl PatternHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Leading 16 bits, used as a cheap per-row fingerprint.
    pub fn fingerprint(&self) -> u16 {
        u16::from_be_bytes([self.0[0], self.0[1]])
    }
}

impl fmt::Display for PatternHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for PatternHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PatternHash({})", &self.to_hex()[..16])
    }
}

impl FromStr for PatternHash {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Config(format!("bad hash `{s}`: {e}")))?;
        let row: Row = bytes
            .try_into()
            .map_err(|_| Error::Config(format!("hash `{s}` is not 256 bits")))?;
        Ok(PatternHash(row))
    }
}

impl Serialize for PatternHash {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for PatternHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// An ordered set of registered attribute keys (the pattern features).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<AttrKey>", into = "Vec<AttrKey>")]
pub struct PatternFeatures(Vec<AttrKey>);

impl PatternFeatures {
    pub fn new(keys: impl IntoIterator<Item = AttrKey>) -> Result<Self> {
        let mut keys: Vec<AttrKey> = keys.into_iter().collect();
        if let Some(bad) = keys.iter().find(|k| !k.is_registered()) {
            return Err(Error::Config(format!("unregistered attribute `{bad}`")));
        }
        keys.sort();
        keys.dedup();
        Ok(PatternFeatures(keys))
    }

    pub fn empty() -> Self {
        PatternFeatures(Vec::new())
    }

    /// Every registered attribute.
    pub fn full() -> Self {
        PatternFeatures::new(AttrKey::REGISTERED).expect("registered keys")
    }

    pub fn keys(&self) -> &[AttrKey] {
        &self.0
    }

    pub fn contains(&self, key: &AttrKey) -> bool {
        self.0.binary_search(key).is_ok()
    }

    pub fn is_subset(&self, other: &PatternFeatures) -> bool {
        self.0.iter().all(|k| other.contains(k))
    }

    pub fn union(&self, keys: impl IntoIterator<Item = AttrKey>) -> Self {
        PatternFeatures::new(self.0.iter().copied().chain(keys)).expect("registered keys")
    }
}

impl TryFrom<Vec<AttrKey>> for PatternFeatures {
    type Error = Error;

    fn try_from(v: Vec<AttrKey>) -> Result<Self> {
        PatternFeatures::new(v)
    }
}

impl From<PatternFeatures> for Vec<AttrKey> {
    fn from(p: PatternFeatures) -> Self {
        p.0
    }
}

/// Per-node hash rows, indexed by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeHashArray {
    pub rows: Vec<Row>,
}

/// A permutation of node ids: `perm[k]` is the node placed at position `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalOrder {
    pub perm: Vec<usize>,
}

fn push_field(buf: &mut Vec<u8>, value: &str) {
    buf.extend_from_slice(&(value.len() as u32).to_le_bytes());
    buf.extend_from_slice(value.as_bytes());
}

/// Initial rows: digest of type tag, in/out degree, the literal kind for
/// literal nodes, then each pattern attribute that applies to the node's type
/// (length-prefixed, in key order).
pub fn init_node_hashes(dag: &QueryDag, feats: &PatternFeatures) -> NodeHashArray {
    let mut buf = Vec::with_capacity(64);
    let rows = (0..dag.len())
        .map(|j| {
            buf.clear();
            let ty = dag.node_type(j);
            push_field(&mut buf, ty.as_str());
            buf.extend_from_slice(&(dag.in_degree(j) as u32).to_le_bytes());
            buf.extend_from_slice(&(dag.out_degree(j) as u32).to_le_bytes());
            if ty == NodeType::Literal {
                push_field(&mut buf, dag.attr(j, AttrKey::LITERAL_TYPE));
            }
            for key in feats.keys().iter().filter(|k| k.node_type == ty) {
                push_field(&mut buf, dag.attr(j, *key));
            }
            sha256(&[&buf])
        })
        .collect();
    NodeHashArray { rows }
}

/// Forward pass over the edges, then backward pass over the reversed edges.
/// Each update consumes already-updated neighbour rows, sorted bytewise;
/// duplicate neighbours are kept.
pub fn propagate(mut hashes: NodeHashArray, dag: &QueryDag) -> Result<NodeHashArray> {
    if hashes.rows.len() != dag.len() {
        return Err(Error::DimMismatch {
            expected: dag.len(),
            actual: hashes.rows.len(),
        });
    }
    let mut neigh: Vec<Row> = Vec::new();
    let mut step = |rows: &mut Vec<Row>, j: usize, adj: &[usize]| {
        neigh.clear();
        neigh.extend(adj.iter().map(|&k| rows[k]));
        neigh.sort_unstable();
        let mut h = Sha256::new();
        h.update(rows[j]);
        for r in &neigh {
            h.update(r);
        }
        rows[j] = h.finalize().into();
    };
    for j in dag.topological_order()? {
        step(&mut hashes.rows, j, dag.preds(j));
    }
    for j in dag.reverse_topological_order()? {
        step(&mut hashes.rows, j, dag.succs(j));
    }
    Ok(hashes)
}

/// Pattern hash over lexicographically sorted rows; ties are broken by node id.
pub fn pattern_hash_and_order(hashes: &NodeHashArray) -> (PatternHash, CanonicalOrder) {
    pattern_hash_and_order_by(hashes, |_, _| Ordering::Equal)
}

/// As [`pattern_hash_and_order`] with a caller-supplied tie-break among
/// equal rows. The hash itself never depends on the tie-break.
pub fn pattern_hash_and_order_by(
    hashes: &NodeHashArray,
    mut tie: impl FnMut(usize, usize) -> Ordering,
) -> (PatternHash, CanonicalOrder) {
    let mut perm: Vec<usize> = (0..hashes.rows.len()).collect();
    perm.sort_by(|&a, &b| {
        hashes.rows[a]
            .cmp(&hashes.rows[b])
            .then_with(|| tie(a, b))
            .then(a.cmp(&b))
    });
    let mut h = Sha256::new();
    for &j in &perm {
        h.update(hashes.rows[j]);
    }
    (PatternHash(h.finalize().into()), CanonicalOrder { perm })
}

/// Final (propagated) rows of `dag` under `feats`.
pub fn node_rows(dag: &QueryDag, feats: &PatternFeatures) -> NodeHashArray {
    propagate(init_node_hashes(dag, feats), dag).expect("QueryDag is acyclic")
}

pub fn pattern_hash(dag: &QueryDag, feats: &PatternFeatures) -> PatternHash {
    pattern_hash_and_order(&node_rows(dag, feats)).0
}

/// Canonical form of a graph under one pattern attribute set.
#[derive(Debug, Clone)]
pub struct Canonical {
    pub hash: PatternHash,
    pub order: CanonicalOrder,
    pub rows: NodeHashArray,
}

/// Hash and canonical order of `dag` under `pattern`.
///
/// Nodes with equal pattern rows are ordered by the raw values of
/// `learn_attrs` (numerically where both sides parse as numbers), then by
/// their rows under `pattern ∪ learn_attrs`, then by node id. Every key
/// before the node id is invariant under isomorphisms that preserve
/// `pattern ∪ learn_attrs`.
pub fn canonicalize(dag: &QueryDag, pattern: &PatternFeatures, learn_attrs: &[AttrKey]) -> Canonical {
    let rows = node_rows(dag, pattern);
    let extra: Vec<AttrKey> = learn_attrs
        .iter()
        .copied()
        .filter(|k| !pattern.contains(k))
        .collect();
    if extra.is_empty() {
        let (hash, order) = pattern_hash_and_order(&rows);
        return Canonical { hash, order, rows };
    }
    let wide = node_rows(dag, &pattern.union(extra.iter().copied()));
    let (hash, order) = pattern_hash_and_order_by(&rows, |a, b| {
        extra
            .iter()
            .map(|k| value_cmp(dag.attr(a, *k), dag.attr(b, *k)))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| wide.rows[a].cmp(&wide.rows[b]))
    });
    Canonical { hash, order, rows }
}

/// Numeric comparison when both sides are numbers, byte order otherwise.
fn value_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygraph::{parse_sql, AttrName, Node};

    fn literal(v: &str) -> Node {
        Node::new(NodeType::Literal)
            .with(AttrName::Value, v)
            .with(AttrName::Type, "int")
    }

    fn h3() -> PatternFeatures {
        PatternFeatures::new([
            AttrKey::TABLE_NAME,
            AttrKey::COLUMN_TYPE,
            AttrKey::COLUMN_NAME,
            AttrKey::OP_CODE,
        ])
        .unwrap()
    }

    #[test]
    fn literals_collapse_without_value_attribute() {
        let dag = parse_sql("SELECT * FROM movies WHERE year IN (2024,2025)", None).unwrap();
        let lits: Vec<usize> = dag.ids_of(NodeType::Literal).collect();
        let init = init_node_hashes(&dag, &h3());
        assert_eq!(init.rows[lits[0]], init.rows[lits[1]]);
        let full = init_node_hashes(&dag, &PatternFeatures::full());
        assert_ne!(full.rows[lits[0]], full.rows[lits[1]]);
    }

    #[test]
    fn empty_pattern_hashes_same_type_and_degree_alike() {
        let dag = QueryDag::new(
            vec![literal("1"), literal("2"), Node::new(NodeType::Op).with(AttrName::Code, "=")],
            vec![(0, 2), (1, 2)],
            2,
        )
        .unwrap();
        let init = init_node_hashes(&dag, &PatternFeatures::empty());
        assert_eq!(init.rows[0], init.rows[1]);
        assert_ne!(init.rows[0], init.rows[2]);
    }

    /// Independent encoding of the initial row for a lone table node.
    fn reference_table_row(name: &str) -> Row {
        let mut msg = Vec::new();
        msg.extend_from_slice(&5u32.to_le_bytes());
        msg.extend_from_slice(b"table");
        msg.extend_from_slice(&0u32.to_le_bytes());
        msg.extend_from_slice(&0u32.to_le_bytes());
        msg.extend_from_slice(&(name.len() as u32).to_le_bytes());
        msg.extend_from_slice(name.as_bytes());
        let mut h = Sha256::new();
        h.update(&msg);
        h.finalize().into()
    }

    #[test]
    fn table_name_rows_match_reference_encoding() {
        let feats = PatternFeatures::new([AttrKey::TABLE_NAME]).unwrap();
        let mk = |name: &str| {
            QueryDag::new(
                vec![Node::new(NodeType::Table).with(AttrName::Name, name)],
                vec![],
                0,
            )
            .unwrap()
        };
        let a = init_node_hashes(&mk("movies"), &feats).rows[0];
        let b = init_node_hashes(&mk("actors"), &feats).rows[0];
        assert_ne!(a, b);
        assert_eq!(a, reference_table_row("movies"));
        assert_eq!(b, reference_table_row("actors"));
        // SHA-256 of "abc", a published test vector.
        assert_eq!(
            hex::encode(sha256(&[b"abc"])),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn isolated_node_is_hashed_three_times() {
        let dag = QueryDag::new(vec![literal("7")], vec![], 0).unwrap();
        let feats = PatternFeatures::full();
        let init = init_node_hashes(&dag, &feats);
        let fin = propagate(init.clone(), &dag).unwrap();
        let expect = sha256(&[&sha256(&[&init.rows[0]])]);
        assert_eq!(fin.rows[0], expect);
    }

    #[test]
    fn reversed_two_node_paths_share_row_multiset() {
        let mk = |edge| QueryDag::new(vec![literal("1"), literal("1")], vec![edge], 0).unwrap();
        let feats = PatternFeatures::full();
        let mut a = node_rows(&mk((0, 1)), &feats).rows;
        let mut b = node_rows(&mk((1, 0)), &feats).rows;
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn propagate_rejects_wrong_length() {
        let dag = QueryDag::new(vec![literal("1")], vec![], 0).unwrap();
        let bad = NodeHashArray { rows: vec![] };
        assert!(matches!(propagate(bad, &dag), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn single_node_order_and_hash() {
        let dag = QueryDag::new(vec![literal("1")], vec![], 0).unwrap();
        let rows = node_rows(&dag, &PatternFeatures::full());
        let (h, pi) = pattern_hash_and_order(&rows);
        assert_eq!(pi.perm, vec![0]);
        assert_eq!(h.0, sha256(&[&rows.rows[0]]));
    }

    #[test]
    fn order_sorts_rows() {
        let dag = parse_sql("SELECT * FROM a, b WHERE a.k=b.k AND a.v<5", None).unwrap();
        let c = canonicalize(&dag, &h3(), &[AttrKey::LITERAL_VALUE]);
        let sorted: Vec<Row> = c.order.perm.iter().map(|&j| c.rows.rows[j]).collect();
        assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        let mut seen = c.order.perm.clone();
        seen.sort();
        assert_eq!(seen, (0..dag.len()).collect::<Vec<_>>());
    }

    #[test]
    fn alias_names_do_not_affect_table_level_hashes() {
        let a = parse_sql("SELECT * FROM movies m WHERE m.stars > 3", None).unwrap();
        let b = parse_sql("SELECT * FROM movies x WHERE x.stars > 3", None).unwrap();
        assert_eq!(pattern_hash(&a, &h3()), pattern_hash(&b, &h3()));
        assert_ne!(
            pattern_hash(&a, &PatternFeatures::full()),
            pattern_hash(&b, &PatternFeatures::full())
        );
    }

    #[test]
    fn junctions_commute() {
        let a = parse_sql("SELECT * FROM t WHERE x > 1 AND y = 'a'", None).unwrap();
        let b = parse_sql("SELECT * FROM t WHERE y = 'a' AND x > 1", None).unwrap();
        let full = PatternFeatures::full();
        assert_eq!(pattern_hash(&a, &full), pattern_hash(&b, &full));
    }

    #[test]
    fn in_list_literals_order_by_value() {
        let a = parse_sql("SELECT * FROM t WHERE x IN (9, 2, 5)", None).unwrap();
        let c = canonicalize(&a, &h3(), &[AttrKey::LITERAL_VALUE]);
        let lits: Vec<&str> = c
            .order
            .perm
            .iter()
            .filter(|&&j| a.node_type(j) == NodeType::Literal)
            .map(|&j| a.attr(j, AttrKey::LITERAL_VALUE))
            .collect();
        assert_eq!(lits, ["2", "5", "9"]);
    }

    #[test]
    fn hash_hex_roundtrip() {
        let h = pattern_hash(&parse_sql("SELECT * FROM t", None).unwrap(), &h3());
        let s = h.to_hex();
        assert_eq!(s.len(), 64);
        assert!(s.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
        assert_eq!(s.parse::<PatternHash>().unwrap(), h);
        let json = serde_json::to_string(&h).unwrap();
        assert_eq!(serde_json::from_str::<PatternHash>(&json).unwrap(), h);
    }
}
