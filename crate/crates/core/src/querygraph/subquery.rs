use std::collections::BTreeSet;

use super::{AttrKey, AttrName, Node, NodeType, QueryDag};

/// A subquery DAG together with its executed cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct SubqueryRecord {
    pub dag: QueryDag,
    pub true_cardinality: Option<u64>,
}

impl SubqueryRecord {
    pub fn new(dag: QueryDag) -> Self {
        SubqueryRecord {
            dag,
            true_cardinality: None,
        }
    }
}

/// Above this many aliases only single-table subqueries and the full join
/// are produced.
const MAX_SUBSET_ALIASES: usize = 16;

/// Enumerates the subqueries a planner would cost for `dag`.
///
/// Per alias: its filter conjuncts one by one and, when there are several,
/// their conjunction (a bare scan when it has none). Then every connected
/// alias subset of the join graph with two or more aliases, rooted at a
/// `join` node over all conjuncts that the subset covers. Subsets are listed
/// by size, then by alias order.
pub fn enumerate_subqueries(dag: &QueryDag) -> Vec<QueryDag> {
    let aliases: Vec<usize> = dag.ids_of(NodeType::Alias).collect();
    if aliases.is_empty() || aliases.len() > 64 {
        return Vec::new();
    }
    let conjuncts = top_level_conjuncts(dag);
    let masks: Vec<u64> = conjuncts
        .iter()
        .map(|&c| alias_mask(dag, c, &aliases))
        .collect();

    let mut out = Vec::new();
    for (i, &alias) in aliases.iter().enumerate() {
        let group: Vec<usize> = conjuncts
            .iter()
            .zip(&masks)
            .filter(|(_, &m)| m == 0 || m == 1 << i)
            .map(|(&c, _)| c)
            .collect();
        match group.len() {
            0 => out.extend(extract(dag, &[alias], Root::Scan)),
            1 => out.extend(extract(dag, &group, Root::Existing)),
            _ => {
                for &c in &group {
                    out.extend(extract(dag, &[c], Root::Existing));
                }
                out.extend(extract(dag, &group, Root::New(NodeType::Op)));
            }
        }
    }

    let n = aliases.len();
    let subsets: Vec<u64> = if n <= MAX_SUBSET_ALIASES {
        let mut s: Vec<u64> = (1u64..1 << n)
            .filter(|s| s.count_ones() >= 2 && connected(*s, &masks))
            .collect();
        s.sort_by_key(|&s| (s.count_ones(), bit_list(s)));
        s
    } else {
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        vec![full].into_iter().filter(|&s| connected(s, &masks)).collect()
    };
    for s in subsets {
        let covered: Vec<usize> = conjuncts
            .iter()
            .zip(&masks)
            .filter(|(_, &m)| m & !s == 0)
            .map(|(&c, _)| c)
            .collect();
        out.extend(extract(dag, &covered, Root::New(NodeType::Join)));
    }
    out
}

fn bit_list(s: u64) -> Vec<u32> {
    (0..64).filter(|b| s >> b & 1 == 1).collect()
}

/// Whether the aliases in `s` are connected by multi-alias conjuncts inside `s`.
fn connected(s: u64, masks: &[u64]) -> bool {
    let start = s & s.wrapping_neg();
    let mut reached = start;
    loop {
        let before = reached;
        for &m in masks {
            if m.count_ones() >= 2 && m & !s == 0 && m & reached != 0 {
                reached |= m;
            }
        }
        if reached == before {
            return reached == s;
        }
    }
}

/// Top-level conjuncts under the root: the inputs of a root `AND`, the
/// non-alias inputs of a `join` root, nothing for a scan, else the root itself.
pub fn top_level_conjuncts(dag: &QueryDag) -> Vec<usize> {
    let root = dag.root();
    match dag.node_type(root) {
        NodeType::Op if dag.attr(root, AttrKey::OP_CODE) == "AND" => dag.preds(root).to_vec(),
        NodeType::Join => dag
            .preds(root)
            .iter()
            .copied()
            .filter(|&p| dag.node_type(p) != NodeType::Alias)
            .collect(),
        NodeType::Scan => Vec::new(),
        _ => vec![root],
    }
}

fn alias_mask(dag: &QueryDag, node: usize, aliases: &[usize]) -> u64 {
    let mut mask = 0u64;
    let mut stack = vec![node];
    let mut seen = BTreeSet::new();
    while let Some(j) = stack.pop() {
        if !seen.insert(j) {
            continue;
        }
        if dag.node_type(j) == NodeType::Alias {
            if let Some(i) = aliases.iter().position(|&a| a == j) {
                mask |= 1 << i;
            }
            continue;
        }
        stack.extend_from_slice(dag.preds(j));
    }
    mask
}

enum Root {
    /// The single selected node is the root.
    Existing,
    /// A fresh node of this type over all selected nodes (`op` means AND).
    New(NodeType),
    /// A fresh scan node over the selected alias.
    Scan,
}

/// Sub-DAG spanned by `tops` and everything upstream of them.
fn extract(dag: &QueryDag, tops: &[usize], root: Root) -> Option<QueryDag> {
    let mut keep = vec![false; dag.len()];
    let mut stack: Vec<usize> = tops.to_vec();
    while let Some(j) = stack.pop() {
        if !std::mem::replace(&mut keep[j], true) {
            stack.extend_from_slice(dag.preds(j));
        }
    }
    let mut remap = vec![usize::MAX; dag.len()];
    let mut nodes = Vec::new();
    for j in 0..dag.len() {
        if keep[j] {
            remap[j] = nodes.len();
            nodes.push(dag.node(j).clone());
        }
    }
    let mut edges: Vec<(usize, usize)> = dag
        .edges()
        .iter()
        .filter(|(s, d)| keep[*s] && keep[*d])
        .map(|&(s, d)| (remap[s], remap[d]))
        .collect();
    let root_id = match root {
        Root::Existing => remap[tops[0]],
        Root::New(ty) => {
            let node = match ty {
                NodeType::Op => Node::new(NodeType::Op).with(AttrName::Code, "AND"),
                other => Node::new(other),
            };
            nodes.push(node);
            let r = nodes.len() - 1;
            edges.extend(tops.iter().map(|&t| (remap[t], r)));
            r
        }
        Root::Scan => {
            nodes.push(Node::new(NodeType::Scan));
            let r = nodes.len() - 1;
            edges.push((remap[tops[0]], r));
            r
        }
    };
    QueryDag::new(nodes, edges, root_id).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonhash::{pattern_hash, PatternFeatures};
    use crate::querygraph::parse_sql;

    #[test]
    fn figure_query_yields_three_subqueries() {
        let dag = parse_sql("SELECT * FROM movies WHERE stars>3 AND year IN (2024,2025)", None).unwrap();
        let subs = enumerate_subqueries(&dag);
        assert_eq!(subs.len(), 3);
        assert_eq!(subs[0].attr(subs[0].root(), AttrKey::OP_CODE), ">");
        assert_eq!(subs[0].len(), 5);
        assert_eq!(subs[1].attr(subs[1].root(), AttrKey::OP_CODE), "IN");
        assert_eq!(subs[1].len(), 6);
        assert_eq!(subs[2].len(), 10);
        assert_eq!(subs[2].edges().len(), 10);
        let full = PatternFeatures::full();
        assert_eq!(pattern_hash(&subs[2], &full), pattern_hash(&dag, &full));
    }

    #[test]
    fn scan_only_query() {
        let dag = parse_sql("SELECT * FROM t", None).unwrap();
        let subs = enumerate_subqueries(&dag);
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].node_type(subs[0].root()), NodeType::Scan);
    }

    /// Brute force: all alias subsets whose induced join graph is connected.
    fn connected_subsets_oracle(n: usize, edges: &[(usize, usize)]) -> BTreeSet<Vec<usize>> {
        let mut out = BTreeSet::new();
        for s in 1usize..1 << n {
            let members: Vec<usize> = (0..n).filter(|i| s >> i & 1 == 1).collect();
            let mut comp = vec![members[0]];
            let mut changed = true;
            while changed {
                changed = false;
                for &(a, b) in edges {
                    if members.contains(&a) && members.contains(&b) {
                        if comp.contains(&a) && !comp.contains(&b) {
                            comp.push(b);
                            changed = true;
                        }
                        if comp.contains(&b) && !comp.contains(&a) {
                            comp.push(a);
                            changed = true;
                        }
                    }
                }
            }
            if comp.len() == members.len() {
                out.insert(members);
            }
        }
        out
    }

    fn alias_sets(subs: &[QueryDag]) -> BTreeSet<Vec<String>> {
        subs.iter()
            .map(|d| {
                let mut v: Vec<String> = d
                    .ids_of(NodeType::Alias)
                    .map(|a| d.attr(a, AttrKey::ALIAS_NAME).to_string())
                    .collect();
                v.sort();
                v
            })
            .collect()
    }

    #[test]
    fn chain_join_enumerates_connected_subsets_only() {
        let dag = parse_sql(
            "SELECT * FROM a, b, c WHERE a.id = b.aid AND b.id = c.bid AND a.x > 1 AND b.y < 2 AND c.z = 3",
            None,
        )
        .unwrap();
        let subs = enumerate_subqueries(&dag);
        assert_eq!(subs.len(), 6);
        let names = ["a", "b", "c"];
        let oracle: BTreeSet<Vec<String>> = connected_subsets_oracle(3, &[(0, 1), (1, 2)])
            .into_iter()
            .map(|s| s.into_iter().map(|i| names[i].to_string()).collect())
            .collect();
        assert_eq!(alias_sets(&subs), oracle);
        assert!(!alias_sets(&subs).contains(&vec!["a".to_string(), "c".to_string()]));
        let abc = subs.last().unwrap();
        assert_eq!(abc.node_type(abc.root()), NodeType::Join);
        assert_eq!(abc.in_degree(abc.root()), 5);
    }

    #[test]
    fn star_join_matches_oracle_and_is_deterministic() {
        let q = "SELECT * FROM t, x, y, z WHERE t.id = x.tid AND t.id = y.tid AND t.id = z.tid AND x.v = 1";
        let dag = parse_sql(q, None).unwrap();
        let subs = enumerate_subqueries(&dag);
        let names = ["t", "x", "y", "z"];
        let oracle: BTreeSet<Vec<String>> =
            connected_subsets_oracle(4, &[(0, 1), (0, 2), (0, 3)])
                .into_iter()
                .map(|s| s.into_iter().map(|i| names[i].to_string()).collect())
                .collect();
        assert_eq!(alias_sets(&subs), oracle);
        assert_eq!(subs.len(), oracle.len());
        assert_eq!(subs, enumerate_subqueries(&parse_sql(q, None).unwrap()));
        // Unfiltered tables appear as scans.
        assert_eq!(subs[0].node_type(subs[0].root()), NodeType::Scan);
    }
}
