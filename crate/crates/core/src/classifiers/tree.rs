//! CART classification trees (axis-aligned binary splits).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{plurality, NCLASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCriterion {
    #[default]
    Gini,
    Entropy,
}

impl SplitCriterion {
    fn impurity(self, counts: &[usize; NCLASS], n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        match self {
            SplitCriterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            SplitCriterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// Cap on internal (split) nodes.
    pub max_splits: usize,
    pub criterion: SplitCriterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_splits: 10,
            criterion: SplitCriterion::Gini,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: usize,
        counts: [usize; NCLASS],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

pub(super) struct Grow<'a, R> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [usize],
    pub criterion: SplitCriterion,
    pub max_splits: Option<usize>,
    /// Candidate features per node; `None` tries every feature.
    pub features_per_node: Option<usize>,
    pub rng: Option<&'a mut R>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

struct Pending {
    node: usize,
    order: usize,
    idx: Vec<usize>,
    split: Candidate,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // Max-heap: larger decrease first, then earlier-created node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.split
            .decrease
            .total_cmp(&other.split.decrease)
            .then(other.order.cmp(&self.order))
    }
}

fn class_counts(y: &[usize], idx: &[usize]) -> [usize; NCLASS] {
    let mut c = [0; NCLASS];
    for &i in idx {
        c[y[i]] += 1;
    }
    c
}

impl<R: Rng> Grow<'_, R> {
    fn best_for_feature(
        &self,
        idx: &[usize],
        f: usize,
        parent: f64,
        total: &[usize; NCLASS],
        sorted: &mut Vec<(f64, usize)>,
    ) -> Option<Candidate> {
        sorted.clear();
        sorted.extend(idx.iter().map(|&i| (self.x[i][f], self.y[i])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted[0].0 == sorted[sorted.len() - 1].0 {
            return None;
        }
        let n = sorted.len();
        let mut left = [0usize; NCLASS];
        let mut best: Option<Candidate> = None;
        for pos in 0..n - 1 {
            left[sorted[pos].1] += 1;
            let (a, b) = (sorted[pos].0, sorted[pos + 1].0);
            if a == b {
                continue;
            }
            let nl = pos + 1;
            let nr = n - nl;
            let mut right = *total;
            for c in 0..NCLASS {
                right[c] -= left[c];
            }
            let decrease = n as f64 * parent
                - nl as f64 * self.criterion.impurity(&left, nl)
                - nr as f64 * self.criterion.impurity(&right, nr);
            if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                let mid = 0.5 * (a + b);
                let threshold = if mid < b { mid } else { a };
                best = Some(Candidate {
                    feature: f,
                    threshold,
                    decrease,
                });
            }
        }
        best
    }

    /// Best split of a node, or `None` when it is pure or nothing varies.
    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let total = class_counts(self.y, idx);
        if idx.len() < 2 || total.iter().filter(|&&c| c > 0).count() < 2 {
            return None;
        }
        let parent = self.criterion.impurity(&total, idx.len());
        let n_features = self.x[0].len();
        let mut order: Vec<usize> = (0..n_features).collect();
        let quota = match (self.features_per_node, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) => {
                order.shuffle(rng);
                m
            }
            _ => n_features,
        };
        let mut sorted = Vec::with_capacity(idx.len());
        let mut best: Option<Candidate> = None;
        let mut examined = 0;
        for &f in &order {
            if examined >= quota {
                break;
            }
            // Features constant within the node do not use up the quota.
            let Some(c) = self.best_for_feature(idx, f, parent, &total, &mut sorted) else {
                continue;
            };
            examined += 1;
            if best.as_ref().is_none_or(|b| c.decrease > b.decrease) {
                best = Some(c);
            }
        }
        best
    }

    pub fn run(mut self, sample: &[usize]) -> DecisionTree {
        let mut nodes = Vec::new();
        let mut heap = BinaryHeap::new();
        let mut created = 0;
        let mut push = |this: &mut Self,
                        nodes: &mut Vec<Node>,
                        heap: &mut BinaryHeap<Pending>,
                        idx: Vec<usize>| {
            let counts = class_counts(this.y, &idx);
            let id = nodes.len();
            nodes.push(Node::Leaf {
                class: plurality(&counts),
                counts,
            });
            if let Some(split) = this.best_split(&idx) {
                heap.push(Pending {
                    node: id,
                    order: created,
                    idx,
                    split,
                });
            }
            created += 1;
            id
        };
        push(&mut self, &mut nodes, &mut heap, sample.to_vec());
        let mut splits = 0;
        while let Some(p) = heap.pop() {
            if self.max_splits.is_some_and(|m| splits >= m) {
                break;
            }
            let Candidate {
                feature, threshold, ..
            } = p.split;
            let (l, r): (Vec<usize>, Vec<usize>) =
                p.idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
            let left = push(&mut self, &mut nodes, &mut heap, l);
            let right = push(&mut self, &mut nodes, &mut heap, r);
            nodes[p.node] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            splits += 1;
        }
        DecisionTree { nodes }
    }
}

impl DecisionTree {
    pub(super) fn fit(p: &TreeParams, x: &[Vec<f64>], y: &[usize]) -> Self {
        let all: Vec<usize> = (0..x.len()).collect();
        Grow::<rand_chacha::ChaCha8Rng> {
            x,
            y,
            criterion: p.criterion,
            max_splits: Some(p.max_splits),
            features_per_node: None,
            rng: None,
        }
        .run(&all)
    }

    /// Leaf class for a point whose feature values come from `value`.
    pub fn predict_with(&self, value: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { class, .. } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, q: &[f64]) -> usize {
        self.predict_with(|f| q[f])
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gini_hand_values() {
        assert_eq!(SplitCriterion::Gini.impurity(&[5, 0, 0], 5), 0.0);
        assert!((SplitCriterion::Gini.impurity(&[1, 1, 0], 2) - 0.5).abs() < 1e-12);
        assert!((SplitCriterion::Entropy.impurity(&[1, 1, 0], 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_split_threshold_is_midpoint() {
        let x: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
        let y = vec![0, 0, 0, 2, 2];
        let t = DecisionTree::fit(&TreeParams::default(), &x, &y);
        assert_eq!(t.n_splits(), 1);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 6.5);
            }
            n => panic!("{n:?}"),
        }
        assert_eq!(t.predict(&[6.4]), 0);
        assert_eq!(t.predict(&[6.6]), 2);
    }

    #[test]
    fn split_cap_respected() {
        // alternating labels along one axis need many splits to separate
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| (i / 2) % 3).collect();
        let t = DecisionTree::fit(&TreeParams { max_splits: 4, ..TreeParams::default() }, &x, &y);
        assert_eq!(t.n_splits(), 4);
        assert_eq!(t.nodes.len(), 9);
        let full = DecisionTree::fit(&TreeParams { max_splits: 1000, ..TreeParams::default() }, &x, &y);
        for (r, &c) in x.iter().zip(&y) {
            assert_eq!(full.predict(r), c);
        }
    }

    #[test]
    fn leaf_tie_goes_to_short() {
        // identical points cannot be split; the 1-1 tie resolves to class 0
        let x = vec![vec![1.0], vec![1.0]];
        let t = DecisionTree::fit(&TreeParams::default(), &x, &[2, 0]);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&[1.0]), 0);
    }

    proptest! {
        #[test]
        fn node_count_bound(
            rows in proptest::collection::vec((0f64..10.0, 0f64..10.0, 0usize..3), 2..60),
            max_splits in 1usize..15,
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.1]).collect();
            let y: Vec<usize> = rows.iter().map(|r| r.2).collect();
            let t = DecisionTree::fit(&TreeParams { max_splits, ..TreeParams::default() }, &x, &y);
            prop_assert!(t.nodes.len() <= 2 * max_splits + 1);
            prop_assert!(t.n_splits() <= max_splits);
        }
    }
}
