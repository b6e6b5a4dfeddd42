use nalgebra::DMatrix;
use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use crate::data::LabelVector;

/// Node of a fitted CART tree, stored in a flat arena.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Majority class index (classification) or in-bag mean (regression).
    Leaf { leaf_id: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub n_leaves: usize,
}

impl Tree {
    /// Single-leaf tree, mostly useful for hand-built forests in tests.
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { leaf_id: 0, value }],
            n_leaves: 1,
        }
    }

    /// One split on `feature` at `threshold` with the given leaf values.
    pub fn stump(feature: usize, threshold: f64, left_value: f64, right_value: f64) -> Self {
        Tree {
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    leaf_id: 0,
                    value: left_value,
                },
                Node::Leaf {
                    leaf_id: 1,
                    value: right_value,
                },
            ],
            n_leaves: 2,
        }
    }

    /// Walks to a leaf, reading features through `get`. Returns (leaf_id, value).
    #[inline]
    pub fn descend(&self, get: impl Fn(usize) -> f64) -> (usize, f64) {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if get(*feature) <= *threshold { *left } else { *right };
                }
                Node::Leaf { leaf_id, value } => return (*leaf_id, *value),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

pub(crate) struct TreeConfig {
    pub mtry: usize,
    pub min_node_size: usize,
}

/// Response in the form the split search needs.
pub(crate) enum Response<'a> {
    Classes { classes: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

impl<'a> Response<'a> {
    pub fn from_labels(y: &'a LabelVector) -> Self {
        match y {
            LabelVector::Classification {
                classes,
                class_names,
            } => Response::Classes {
                classes,
                n_classes: class_names.len().max(1),
            },
            LabelVector::Regression(v) => Response::Values(v),
        }
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
    n_left: usize,
}

pub(crate) struct TreeBuilder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a Response<'a>,
    cfg: &'a TreeConfig,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
    n_leaves: usize,
    // scratch buffer reused for every (node, feature) sort
    pairs: Vec<(f64, usize)>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        x: &'a DMatrix<f64>,
        y: &'a Response<'a>,
        cfg: &'a TreeConfig,
        rng: &'a mut ChaCha8Rng,
    ) -> Self {
        TreeBuilder {
            x,
            y,
            cfg,
            rng,
            nodes: Vec::new(),
            n_leaves: 0,
            pairs: Vec::new(),
        }
    }

    /// Grows a tree on `rows` (a bootstrap sample, duplicates allowed).
    pub fn build(mut self, mut rows: Vec<usize>) -> Tree {
        self.nodes.push(Node::Leaf { leaf_id: 0, value: 0.0 });
        // explicit stack: (node slot, start, end)
        let mut stack = vec![(0usize, 0usize, rows.len())];
        while let Some((slot, start, end)) = stack.pop() {
            let node_rows = &mut rows[start..end];
            match self.best_split(node_rows) {
                Some(c) => {
                    // partition in place, preserving relative order on each side
                    let (mut l, mut r): (Vec<usize>, Vec<usize>) = node_rows
                        .iter()
                        .copied()
                        .partition(|&i| self.x[(i, c.feature)] <= c.threshold);
                    debug_assert_eq!(l.len(), c.n_left);
                    let split_at = start + l.len();
                    l.append(&mut r);
                    node_rows.copy_from_slice(&l);
                    let left = self.nodes.len();
                    let right = left + 1;
                    self.nodes.push(Node::Leaf { leaf_id: 0, value: 0.0 });
                    self.nodes.push(Node::Leaf { leaf_id: 0, value: 0.0 });
                    self.nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    };
                    // right pushed first so the left subtree is finished first
                    stack.push((right, split_at, end));
                    stack.push((left, start, split_at));
                }
                None => {
                    let value = self.leaf_value(node_rows);
                    self.nodes[slot] = Node::Leaf {
                        leaf_id: self.n_leaves,
                        value,
                    };
                    self.n_leaves += 1;
                }
            }
        }
        Tree {
            nodes: self.nodes,
            n_leaves: self.n_leaves,
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> f64 {
        match self.y {
            Response::Classes { classes, n_classes } => {
                let mut counts = vec![0usize; *n_classes];
                for &i in rows {
                    counts[classes[i]] += 1;
                }
                majority(&counts) as f64
            }
            Response::Values(v) => rows.iter().map(|&i| v[i]).sum::<f64>() / rows.len() as f64,
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.y {
            Response::Classes { classes, .. } => {
                let c0 = classes[rows[0]];
                rows.iter().all(|&i| classes[i] == c0)
            }
            Response::Values(v) => {
                let v0 = v[rows[0]];
                rows.iter().all(|&i| v[i] == v0)
            }
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        if n < self.cfg.min_node_size.max(2) || self.is_pure(rows) {
            return None;
        }
        let p = self.x.ncols();
        let mut features = index::sample(self.rng, p, self.cfg.mtry).into_vec();
        features.sort_unstable();

        let mut best: Option<Candidate> = None;
        for &f in &features {
            self.pairs.clear();
            self.pairs.extend(rows.iter().map(|&i| (self.x[(i, f)], i)));
            self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.pairs[0].0 == self.pairs[n - 1].0 {
                continue;
            }
            let found = match self.y {
                Response::Classes { classes, n_classes } => {
                    scan_gini(&self.pairs, classes, *n_classes)
                }
                Response::Values(v) => scan_variance(&self.pairs, v),
            };
            if let Some((pos, score)) = found {
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let lo = self.pairs[pos].0;
                    let hi = self.pairs[pos + 1].0;
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        score,
                        n_left: pos + 1,
                    });
                }
            }
        }
        best
    }
}

/// Majority class, ties to the smallest index.
pub(crate) fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (c, &k) in counts.iter().enumerate() {
        if k > counts[best] {
            best = c;
        }
    }
    best
}

// Both scans return the position `k` of the last left element of the best
// split (between sorted positions k and k+1) together with its impurity
// decrease. Only strictly positive decreases count.

fn scan_gini(pairs: &[(f64, usize)], classes: &[usize], n_classes: usize) -> Option<(usize, f64)> {
    let n = pairs.len();
    let mut right = vec![0usize; n_classes];
    for &(_, i) in pairs {
        right[classes[i]] += 1;
    }
    let mut left = vec![0usize; n_classes];
    let sq = |c: &[usize]| c.iter().map(|&k| (k * k) as f64).sum::<f64>();
    let parent = sq(&right) / n as f64;
    let mut sq_left = 0.0;
    let mut sq_right = sq(&right);
    let mut best: Option<(usize, f64)> = None;
    for k in 0..n - 1 {
        let c = classes[pairs[k].1];
        sq_left += (2 * left[c] + 1) as f64;
        sq_right -= (2 * right[c] - 1) as f64;
        left[c] += 1;
        right[c] -= 1;
        if pairs[k].0 == pairs[k + 1].0 {
            continue;
        }
        let nl = (k + 1) as f64;
        let nr = (n - k - 1) as f64;
        let gain = sq_left / nl + sq_right / nr - parent;
        if gain > 1e-12 * parent.max(1.0) && best.is_none_or(|(_, g)| gain > g) {
            best = Some((k, gain));
        }
    }
    best
}

fn scan_variance(pairs: &[(f64, usize)], values: &[f64]) -> Option<(usize, f64)> {
    let n = pairs.len();
    let total: f64 = pairs.iter().map(|&(_, i)| values[i]).sum();
    let parent = total * total / n as f64;
    let scale: f64 = pairs.iter().map(|&(_, i)| values[i] * values[i]).sum::<f64>().max(1.0);
    let mut sum_left = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for k in 0..n - 1 {
        sum_left += values[pairs[k].1];
        if pairs[k].0 == pairs[k + 1].0 {
            continue;
        }
        let nl = (k + 1) as f64;
        let nr = (n - k - 1) as f64;
        let sum_right = total - sum_left;
        let gain = sum_left * sum_left / nl + sum_right * sum_right / nr - parent;
        if gain > 1e-12 * scale && best.is_none_or(|(_, g)| gain > g) {
            best = Some((k, gain));
        }
    }
    best
}
