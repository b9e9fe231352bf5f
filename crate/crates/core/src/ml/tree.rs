use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{ForestParams, TreeParams};
use crate::{derive_seed, Label};

/// A binary classification tree stored as a flat node array; node 0 is the
/// root. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Training class counts `[safe, unsafe]` that reached this node.
    pub counts: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

impl ClassTree {
    fn leaf(&self, x: &[f64]) -> &TreeNode {
        let mut node = &self.nodes[0];
        while let Some(s) = node.split {
            node = &self.nodes[if x[s.feature] <= s.threshold { s.left } else { s.right }];
        }
        node
    }

    /// Share of unsafe training rows in the leaf reached by `x`.
    pub fn unsafe_share(&self, x: &[f64]) -> f64 {
        let [s, u] = self.leaf(x).counts;
        if s + u == 0 {
            0.5
        } else {
            u as f64 / (s + u) as f64
        }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        majority(self.leaf(x).counts)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &ClassTree, i: usize) -> usize {
            match t.nodes[i].split {
                None => 0,
                Some(s) => 1 + walk(t, s.left).max(walk(t, s.right)),
            }
        }
        walk(self, 0)
    }
}

fn majority(counts: [usize; 2]) -> Label {
    if counts[1] >= counts[0] {
        Label::Unsafe
    } else {
        Label::Safe
    }
}

fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Working node used while growing and pruning; keeps its training rows.
struct Node {
    counts: [usize; 2],
    items: Vec<usize>,
    split: Option<(usize, f64, Box<Node>, Box<Node>)>,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Label],
    min_leaf: usize,
    max_depth: usize,
    /// Features examined per split; `None` means all.
    sample_features: Option<usize>,
    rng: ChaCha8Rng,
}

fn class_counts(items: &[usize], y: &[Label]) -> [usize; 2] {
    let u = items.iter().filter(|&&i| y[i].is_unsafe()).count();
    [items.len() - u, u]
}

impl Grower<'_> {
    fn grow(&mut self, items: Vec<usize>, depth: usize) -> Node {
        let counts = class_counts(&items, self.y);
        let mut node = Node {
            counts,
            items,
            split: None,
        };
        let depth_left = self.max_depth == 0 || depth < self.max_depth;
        if counts[0] == 0 || counts[1] == 0 || node.items.len() < 2 * self.min_leaf || !depth_left {
            return node;
        }
        let Some((feature, threshold)) = self.best_split(&node.items, counts) else {
            return node;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            node.items.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        node.split = Some((feature, threshold, Box::new(l), Box::new(r)));
        node
    }

    fn best_split(&mut self, items: &[usize], counts: [usize; 2]) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        if let Some(k) = self.sample_features {
            features.shuffle(&mut self.rng);
            features.truncate(k.clamp(1, d));
        }
        let parent = entropy(counts);
        let m = items.len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = items.to_vec();
        for &j in &features {
            order.sort_by(|&a, &b| self.x[a][j].total_cmp(&self.x[b][j]));
            let mut left = [0usize; 2];
            for pos in 0..m - 1 {
                left[self.y[order[pos]].is_unsafe() as usize] += 1;
                let (lo, hi) = (self.x[order[pos]][j], self.x[order[pos + 1]][j]);
                let nl = pos + 1;
                if lo == hi || nl < self.min_leaf || m - nl < self.min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let gain = parent
                    - (nl as f64 / m as f64) * entropy(left)
                    - ((m - nl) as f64 / m as f64) * entropy(right);
                if gain > 1e-12 && best.map_or(true, |(g, _, _)| gain > g + 1e-12) {
                    let mut t = lo + (hi - lo) / 2.0;
                    if t >= hi {
                        t = lo;
                    }
                    best = Some((gain, j, t));
                }
            }
        }
        best.map(|(_, j, t)| (j, t))
    }
}

/// Upper confidence bound on extra errors at a leaf with `n` rows and `e`
/// training errors (the classic C4.5 pessimistic estimate).
fn add_errs(n: f64, e: f64, z: f64, cf: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (add_errs(n, 1.0, z, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt()) / (1.0 + z * z / n);
    r * n - e
}

struct Pessimist<'a> {
    x: &'a [Vec<f64>],
    y: &'a [Label],
    z: f64,
    cf: f64,
    raising: bool,
}

impl Pessimist<'_> {
    fn leaf_errors(&self, counts: [usize; 2]) -> f64 {
        let n = (counts[0] + counts[1]) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let e = counts[0].min(counts[1]) as f64;
        e + add_errs(n, e, self.z, self.cf)
    }

    fn tree_errors(&self, node: &Node) -> f64 {
        match &node.split {
            None => self.leaf_errors(node.counts),
            Some((_, _, l, r)) => self.tree_errors(l) + self.tree_errors(r),
        }
    }

    fn branch_errors(&self, node: &Node, items: &[usize]) -> f64 {
        match &node.split {
            None => self.leaf_errors(class_counts(items, self.y)),
            Some((j, t, l, r)) => {
                let (li, ri): (Vec<usize>, Vec<usize>) = items.iter().partition(|&&i| self.x[i][*j] <= *t);
                self.branch_errors(l, &li) + self.branch_errors(r, &ri)
            }
        }
    }

    fn prune(&self, node: &mut Node) {
        let Some((_, _, l, r)) = &mut node.split else {
            return;
        };
        self.prune(l);
        self.prune(r);
        let largest_left = l.items.len() >= r.items.len();
        let largest: &Node = if largest_left { l } else { r };
        let errors_largest = if self.raising {
            self.branch_errors(largest, &node.items)
        } else {
            f64::INFINITY
        };
        let errors_leaf = self.leaf_errors(node.counts);
        let errors_tree = self.tree_errors(node);
        if errors_leaf <= errors_tree + 0.1 && errors_leaf <= errors_largest + 0.1 {
            node.split = None;
        } else if errors_largest <= errors_tree + 0.1 {
            let Some((_, _, l, r)) = node.split.take() else { unreachable!() };
            let raised = if largest_left { *l } else { *r };
            node.split = raised.split;
            let items = std::mem::take(&mut node.items);
            redistribute(node, items, self.x, self.y);
            self.prune(node);
        }
    }
}

fn redistribute(node: &mut Node, items: Vec<usize>, x: &[Vec<f64>], y: &[Label]) {
    node.counts = class_counts(&items, y);
    if let Some((j, t, l, r)) = &mut node.split {
        let (li, ri): (Vec<usize>, Vec<usize>) = items.iter().partition(|&&i| x[i][*j] <= *t);
        redistribute(l, li, x, y);
        redistribute(r, ri, x, y);
    }
    node.items = items;
}

/// Reduced-error pruning on held-out rows; returns the subtree's errors.
fn reduced_error_prune(node: &mut Node, items: &[usize], x: &[Vec<f64>], y: &[Label]) -> usize {
    let label = majority(node.counts);
    let leaf_err = items.iter().filter(|&&i| y[i] != label).count();
    let Some((j, t, l, r)) = &mut node.split else {
        return leaf_err;
    };
    let (li, ri): (Vec<usize>, Vec<usize>) = items.iter().partition(|&&i| x[i][*j] <= *t);
    let sub = reduced_error_prune(l, &li, x, y) + reduced_error_prune(r, &ri, x, y);
    if leaf_err <= sub {
        node.split = None;
        leaf_err
    } else {
        sub
    }
}

fn flatten(root: Node) -> ClassTree {
    let mut nodes = Vec::new();
    fn push(node: Node, parent: [usize; 2], nodes: &mut Vec<TreeNode>) -> usize {
        let idx = nodes.len();
        // an empty leaf votes like its parent
        let counts = if node.counts == [0, 0] { parent } else { node.counts };
        nodes.push(TreeNode { counts, split: None });
        if let Some((feature, threshold, l, r)) = node.split {
            let left = push(*l, counts, nodes);
            let right = push(*r, counts, nodes);
            nodes[idx].split = Some(Split {
                feature,
                threshold,
                left,
                right,
            });
        }
        idx
    }
    push(root, [0, 0], &mut nodes);
    ClassTree { nodes }
}

/// Gain tree with pessimistic pruning (optionally raising subtrees), or
/// reduced-error pruning on a stratified 20% holdout when requested.
pub(crate) fn fit_pruned(x: &[Vec<f64>], y: &[Label], p: &TreeParams) -> ClassTree {
    let all: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (grow_items, prune_items) = if p.reduced_error_pruning {
        holdout(&all, y, 0.2, &mut rng)
    } else {
        (all, Vec::new())
    };
    let mut grower = Grower {
        x,
        y,
        min_leaf: p.min_leaf,
        max_depth: p.max_depth,
        sample_features: None,
        rng,
    };
    let mut root = grower.grow(grow_items, 0);
    if p.reduced_error_pruning {
        reduced_error_prune(&mut root, &prune_items, x, y);
    } else {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let pruner = Pessimist {
            x,
            y,
            z: normal.inverse_cdf(1.0 - p.confidence),
            cf: p.confidence,
            raising: p.subtree_raising,
        };
        pruner.prune(&mut root);
    }
    flatten(root)
}

fn holdout(items: &[usize], y: &[Label], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut keep = Vec::new();
    let mut held = Vec::new();
    for class in [Label::Safe, Label::Unsafe] {
        let mut idx: Vec<usize> = items.iter().copied().filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let h = (idx.len() as f64 * fraction).round() as usize;
        let h = if idx.len() > 1 { h.min(idx.len() - 1) } else { 0 };
        held.extend_from_slice(&idx[..h]);
        keep.extend_from_slice(&idx[h..]);
    }
    keep.sort_unstable();
    held.sort_unstable();
    (keep, held)
}

/// Unpruned randomized trees, one derived seed per tree.
pub(crate) fn fit_forest(x: &[Vec<f64>], y: &[Label], p: &ForestParams) -> Vec<ClassTree> {
    let n = x.len();
    let d = x[0].len();
    let k = if p.features_per_split == 0 {
        ((d as f64).sqrt().floor() as usize).max(1)
    } else {
        p.features_per_split.min(d)
    };
    (0..p.trees)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, t as u64));
            let items: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut grower = Grower {
                x,
                y,
                min_leaf: p.min_leaf,
                max_depth: p.max_depth,
                sample_features: Some(k),
                rng,
            };
            flatten(grower.grow(items, 0))
        })
        .collect()
}
