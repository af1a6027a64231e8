use serde::{Deserialize, Serialize};

use super::TrainingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 50,
            max_depth: 3,
            learning_rate: 0.3,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub dim: usize,
}

impl GbdtModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

pub fn predict_gbdt(model: &GbdtModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim {
        return Err(Error::DimMismatch {
            expected: model.dim,
            actual: x.len(),
        });
    }
    Ok(model.predict(x))
}

#[derive(Clone, Copy, Default)]
struct Acc {
    w: f64,
    wr: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, w: f64, r: f64) {
        self.w += w;
        self.wr += w * r;
        self.n += 1;
    }

    fn score(&self) -> f64 {
        if self.w > 0.0 {
            self.wr * self.wr / self.w
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

const NO_SLOT: usize = usize::MAX;

/// Least-squares gradient boosting with optional sample weights.
///
/// Rows with zero weight are ignored. Deterministic given the row order.
pub fn fit_gbdt(set: &TrainingSet, params: &GbdtParams, weights: Option<&[f64]>) -> Result<GbdtModel> {
    if set.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::Config(format!(
            "learning rate must lie in (0, 1], got {}",
            params.learning_rate
        )));
    }
    let d = set.dim();
    let y = set.targets();
    let w: Vec<f64> = match weights {
        Some(w) if w.len() != set.len() => {
            return Err(Error::DimMismatch {
                expected: set.len(),
                actual: w.len(),
            })
        }
        Some(w) => w.to_vec(),
        None => vec![1.0; set.len()],
    };
    let active: Vec<usize> = (0..set.len()).filter(|&i| w[i] > 0.0).collect();
    let total_w: f64 = active.iter().map(|&i| w[i]).sum();
    if active.is_empty() || !(total_w > 0.0) {
        return Err(Error::EmptyHistory);
    }
    let base_score = active.iter().map(|&i| w[i] * y[i]).sum::<f64>() / total_w;
    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut idx = active.clone();
            idx.sort_by(|&a, &b| set.row(a)[f].total_cmp(&set.row(b)[f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let min_leaf = params.min_samples_leaf.max(1);
    let mut pred = vec![base_score; set.len()];
    let mut resid = vec![0.0; set.len()];
    let mut node_of = vec![0usize; set.len()];
    let mut trees = Vec::with_capacity(params.rounds);
    for _ in 0..params.rounds {
        for &i in &active {
            resid[i] = y[i] - pred[i];
            node_of[i] = 0;
        }
        let mut nodes = vec![TreeNode::Leaf { value: 0.0 }];
        let mut stats = vec![Acc::default()];
        for &i in &active {
            stats[0].add(w[i], resid[i]);
        }
        let mut frontier = vec![0usize];
        for _ in 0..params.max_depth {
            let mut slot_of = vec![NO_SLOT; nodes.len()];
            for (s, &nd) in frontier.iter().enumerate() {
                slot_of[nd] = s;
            }
            let mut best: Vec<Option<Best>> = vec![None; frontier.len()];
            let mut acc = vec![Acc::default(); frontier.len()];
            let mut last = vec![f64::NAN; frontier.len()];
            for f in 0..d {
                acc.iter_mut().for_each(|a| *a = Acc::default());
                for &i in &sorted[f] {
                    let s = slot_of[node_of[i]];
                    if s == NO_SLOT {
                        continue;
                    }
                    let v = set.row(i)[f];
                    let total = stats[frontier[s]];
                    let a = acc[s];
                    if a.n >= min_leaf && total.n - a.n >= min_leaf && v > last[s] {
                        let right = Acc {
                            w: total.w - a.w,
                            wr: total.wr - a.wr,
                            n: total.n - a.n,
                        };
                        let gain = a.score() + right.score() - total.score();
                        let floor = best[s].map_or(1e-12 * (1.0 + total.score()), |b| b.gain);
                        if gain > floor {
                            let mut threshold = last[s] + (v - last[s]) / 2.0;
                            if threshold >= v {
                                threshold = last[s];
                            }
                            best[s] = Some(Best {
                                gain,
                                feature: f,
                                threshold,
                            });
                        }
                    }
                    acc[s].add(w[i], resid[i]);
                    last[s] = v;
                }
            }
            let mut next = Vec::new();
            let mut child_of = vec![(0usize, 0usize); frontier.len()];
            for (s, b) in best.iter().enumerate() {
                if let Some(b) = b {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    nodes.push(TreeNode::Leaf { value: 0.0 });
                    stats.push(Acc::default());
                    stats.push(Acc::default());
                    nodes[frontier[s]] = TreeNode::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left: l,
                        right: r,
                    };
                    child_of[s] = (l, r);
                    next.extend([l, r]);
                }
            }
            if next.is_empty() {
                break;
            }
            for &i in &active {
                let s = slot_of[node_of[i]];
                if s == NO_SLOT {
                    continue;
                }
                if let Some(b) = best[s] {
                    let (l, r) = child_of[s];
                    let c = if set.row(i)[b.feature] <= b.threshold { l } else { r };
                    node_of[i] = c;
                    stats[c].add(w[i], resid[i]);
                }
            }
            frontier = next;
        }
        for (nd, node) in nodes.iter_mut().enumerate() {
            if let TreeNode::Leaf { value } = node {
                let st = stats[nd];
                *value = if st.w > 0.0 { st.wr / st.w } else { 0.0 };
            }
        }
        let tree = Tree { nodes };
        for &i in &active {
            if let TreeNode::Leaf { value } = tree.nodes[node_of[i]] {
                pred[i] += params.learning_rate * value;
            }
        }
        trees.push(tree);
    }
    Ok(GbdtModel {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        dim: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(xs: &[Vec<f64>], ys: &[f64]) -> TrainingSet {
        TrainingSet::from_targets(xs, ys).unwrap()
    }

    #[test]
    fn zero_rounds_predict_mean() {
        let s = set(&[vec![1.0], vec![2.0], vec![3.0]], &[1.0, 2.0, 6.0]);
        let p = GbdtParams {
            rounds: 0,
            ..Default::default()
        };
        let m = fit_gbdt(&s, &p, None).unwrap();
        assert_eq!(m.predict(&[100.0]), 3.0);
        assert!(matches!(fit_gbdt(&TrainingSet::new(1), &p, None), Err(Error::EmptyHistory)));
    }

    #[test]
    fn step_function_is_separated() {
        let xs: Vec<Vec<f64>> = (-5..5).map(|v| vec![v as f64]).collect();
        let ys: Vec<f64> = (-5..5).map(|v| if v < 0 { 0.0 } else { 10.0 }).collect();
        let p = GbdtParams {
            rounds: 10,
            max_depth: 1,
            ..Default::default()
        };
        let m = fit_gbdt(&set(&xs, &ys), &p, None).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((m.predict(x) - y).abs() < 0.5);
        }
        assert!(matches!(m.trees[0].nodes[0], TreeNode::Split { feature: 0, threshold, .. } if threshold == -0.5));
    }

    /// Every (feature, threshold) split with both sides non-empty.
    fn exhaustive_best(xs: &[Vec<f64>], ys: &[f64], min_leaf: usize) -> Option<(f64, f64, f64)> {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|y| (y - m) * (y - m)).sum::<f64>()
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mut best: Option<(f64, f64, f64)> = None;
        for f in 0..xs[0].len() {
            for t in xs.iter().map(|x| x[f]) {
                let (l, r): (Vec<_>, Vec<_>) = xs.iter().zip(ys).partition(|(x, _)| x[f] <= t);
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let l: Vec<f64> = l.into_iter().map(|p| *p.1).collect();
                let r: Vec<f64> = r.into_iter().map(|p| *p.1).collect();
                let cost = sse(&l) + sse(&r);
                if best.is_none_or(|b| cost < b.0 - 1e-9) {
                    best = Some((cost, mean(&l), mean(&r)));
                }
            }
        }
        best
    }

    #[test]
    fn single_stump_matches_exhaustive_split() {
        let xs = vec![vec![1.0, 7.0], vec![2.0, 3.0], vec![3.0, 5.0], vec![4.0, 1.0]];
        let ys = vec![1.0, 5.0, 2.0, 8.0];
        let p = GbdtParams {
            rounds: 1,
            max_depth: 1,
            learning_rate: 1.0,
            min_samples_leaf: 1,
        };
        let m = fit_gbdt(&set(&xs, &ys), &p, None).unwrap();
        let (_, lm, rm) = exhaustive_best(&xs, &ys, 1).unwrap();
        let mut preds: Vec<f64> = xs.iter().map(|x| m.predict(x)).collect();
        preds.sort_by(f64::total_cmp);
        preds.dedup();
        let mut expect = vec![lm, rm];
        expect.sort_by(f64::total_cmp);
        assert_eq!(preds.len(), 2);
        for (a, b) in preds.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_first_splits_match_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(4..=32);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen_range(0..10) as f64).collect())
                .collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let p = GbdtParams {
                rounds: 1,
                max_depth: 1,
                learning_rate: 1.0,
                min_samples_leaf: 2,
            };
            let m = fit_gbdt(&set(&xs, &ys), &p, None).unwrap();
            let Some((cost, ..)) = exhaustive_best(&xs, &ys, 2) else {
                continue;
            };
            let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (m.predict(x) - y).powi(2)).sum();
            assert!((sse - cost).abs() < 1e-9, "{sse} vs {cost}");
        }
    }

    #[test]
    fn weights_shift_base_score() {
        let s = set(&[vec![0.0], vec![1.0]], &[0.0, 10.0]);
        let p = GbdtParams {
            rounds: 0,
            ..Default::default()
        };
        let m = fit_gbdt(&s, &p, Some(&[3.0, 1.0])).unwrap();
        assert_eq!(m.base_score, 2.5);
        let m = fit_gbdt(&s, &p, Some(&[0.0, 1.0])).unwrap();
        assert_eq!(m.base_score, 10.0);
    }

    proptest! {
        #[test]
        fn training_loss_never_increases(
            rows in prop::collection::vec((0.0f64..5.0, -3.0f64..3.0, 0.0f64..9.0, 0.1f64..2.0), 2..40),
            depth in 1usize..4,
        ) {
            let xs: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.1]).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let w: Vec<f64> = rows.iter().map(|r| r.3).collect();
            let p = GbdtParams { rounds: 8, max_depth: depth, ..Default::default() };
            let m = fit_gbdt(&set(&xs, &ys), &p, Some(&w)).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=m.trees.len() {
                let partial = GbdtModel { trees: m.trees[..k].to_vec(), ..m.clone() };
                let loss: f64 = xs.iter().zip(&ys).zip(&w)
                    .map(|((x, y), wi)| wi * (partial.predict(x) - y).powi(2)).sum();
                prop_assert!(loss <= prev + 1e-9);
                prev = loss;
            }
            for t in &m.trees {
                prop_assert!(t.depth() <= depth);
            }
            let again = fit_gbdt(&set(&xs, &ys), &p, Some(&w)).unwrap();
            prop_assert_eq!(again, m);
        }
    }
}
