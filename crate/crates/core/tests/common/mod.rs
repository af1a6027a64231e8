#![allow(dead_code)]

use patterncard::querygraph::{AttrName, Node, NodeType, QueryDag};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const OPS: [&str; 11] = ["=", "<", ">", "<=", ">=", "<>", "IN", "AND", "OR", "NOT", "LIKE"];
const WORDS: [&str; 5] = ["alpha", "beta", "gamma", "delta", "omega"];
const TYPES: [&str; 4] = ["int", "float", "string", "date"];

pub fn literal_value(rng: &mut ChaCha8Rng, ty: &str) -> String {
    match ty {
        "int" => rng.gen_range(-20..=20).to_string(),
        "float" => format!("{:.1}", rng.gen_range(-50..=50) as f64 / 2.0),
        "string" => WORDS.choose(rng).unwrap().to_string(),
        _ => format!("2020-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28)),
    }
}

fn random_node(rng: &mut ChaCha8Rng, ty: NodeType) -> Node {
    let mut n = Node::new(ty);
    match ty {
        NodeType::Table => n.set(AttrName::Name, format!("t{}", rng.gen_range(0..6))),
        NodeType::Alias => n.set(AttrName::Name, format!("a{}", rng.gen_range(0..4))),
        NodeType::Column => {
            n.set(AttrName::Name, format!("c{}", rng.gen_range(0..6)));
            n.set(AttrName::Type, *TYPES.choose(rng).unwrap());
            n.set(AttrName::NumUniques, rng.gen_range(1..50).to_string());
        }
        NodeType::Literal => {
            let ty = *TYPES.choose(rng).unwrap();
            n.set(AttrName::Type, ty);
            n.set(AttrName::Value, literal_value(rng, ty));
        }
        NodeType::Op => n.set(AttrName::Code, *OPS.choose(rng).unwrap()),
        NodeType::Function => n.set(AttrName::Name, *["UPPER", "LOWER", "ABS"].choose(rng).unwrap()),
        NodeType::Join | NodeType::Scan => {}
    }
    n
}

/// A random attributed DAG with `lo..=hi` nodes. Graphs of at least eight
/// nodes contain every node type.
pub fn random_dag(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> QueryDag {
    let n = rng.gen_range(lo..=hi);
    let mut types: Vec<NodeType> = (0..n)
        .map(|i| {
            if i < NodeType::ALL.len() {
                NodeType::ALL[i]
            } else {
                *NodeType::ALL.choose(rng).unwrap()
            }
        })
        .collect();
    types.shuffle(rng);
    let nodes: Vec<Node> = types.iter().map(|&t| random_node(rng, t)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let p = (2.5 / n as f64).min(1.0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                edges.push((order[i], order[j]));
            }
        }
    }
    edges.shuffle(rng);
    QueryDag::new(nodes, edges, order[n - 1]).unwrap()
}

pub fn random_perm(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

type Label = (NodeType, Vec<(AttrName, String)>, usize, usize);

fn label(g: &QueryDag, v: usize) -> Label {
    let attrs = g.node(v).attrs().map(|(a, s)| (a, s.to_string())).collect();
    (g.node_type(v), attrs, g.in_degree(v), g.out_degree(v))
}

fn edge_count(g: &QueryDag, a: usize, b: usize) -> usize {
    g.succs(a).iter().filter(|&&x| x == b).count()
}

/// Exact attributed isomorphism test by backtracking.
pub fn isomorphic(g: &QueryDag, h: &QueryDag) -> bool {
    let n = g.len();
    if n != h.len() || g.edges().len() != h.edges().len() {
        return false;
    }
    let lg: Vec<_> = (0..n).map(|v| label(g, v)).collect();
    let lh: Vec<_> = (0..n).map(|v| label(h, v)).collect();
    let mut a = lg.clone();
    let mut b = lh.clone();
    a.sort();
    b.sort();
    if a != b {
        return false;
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn go(
        v: usize,
        g: &QueryDag,
        h: &QueryDag,
        lg: &[Label],
        lh: &[Label],
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if v == g.len() {
            return true;
        }
        for w in 0..h.len() {
            if used[w] || lg[v] != lh[w] {
                continue;
            }
            let consistent = (0..v).all(|u| {
                edge_count(g, u, v) == edge_count(h, map[u], w) && edge_count(g, v, u) == edge_count(h, w, map[u])
            }) && edge_count(g, v, v) == edge_count(h, w, w);
            if !consistent {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if go(v + 1, g, h, lg, lh, map, used) {
                return true;
            }
            used[w] = false;
        }
        false
    }
    go(0, g, h, &lg, &lh, &mut map, &mut used)
}
