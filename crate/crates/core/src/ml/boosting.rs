use serde::{Deserialize, Serialize};

use super::{BoostingParams, Parameters};
use crate::Label;

/// Small regression tree fitted to pseudo-residuals; flat node array with
/// the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegressionNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RegressionNode::Leaf { value } => return value,
                RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Per-feature row orders, sorted once per fit.
struct Presorted {
    orders: Vec<Vec<usize>>,
}

impl Presorted {
    fn new(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let orders = (0..d)
            .map(|j| {
                let mut o: Vec<usize> = (0..x.len()).collect();
                o.sort_by(|&a, &b| x[a][j].total_cmp(&x[b][j]));
                o
            })
            .collect();
        Presorted { orders }
    }
}

/// Best variance-reducing split of the rows flagged in `member`. The
/// improvement `nl nr / n (mean_l - mean_r)^2` equals the drop in squared
/// error, so every supported criterion ranks splits identically.
fn best_split(x: &[Vec<f64>], r: &[f64], member: &[bool], sorted: &Presorted) -> Option<(usize, f64)> {
    let (n, total) = member
        .iter()
        .zip(r)
        .filter(|(m, _)| **m)
        .fold((0usize, 0.0), |(c, s), (_, v)| (c + 1, s + v));
    if n < 2 {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for (j, order) in sorted.orders.iter().enumerate() {
        let rows: Vec<usize> = order.iter().copied().filter(|&i| member[i]).collect();
        let mut nl = 0usize;
        let mut sl = 0.0;
        for w in rows.windows(2) {
            nl += 1;
            sl += r[w[0]];
            let (lo, hi) = (x[w[0]][j], x[w[1]][j]);
            if lo == hi {
                continue;
            }
            let nr = n - nl;
            let diff = sl / nl as f64 - (total - sl) / nr as f64;
            let gain = nl as f64 * nr as f64 / n as f64 * diff * diff;
            if gain > 1e-15 && best.map_or(true, |(g, _, _)| gain > g * (1.0 + 1e-12)) {
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

struct TreeFit<'a> {
    x: &'a [Vec<f64>],
    residual: &'a [f64],
    sorted: &'a Presorted,
    max_depth: usize,
    leaf_value: &'a dyn Fn(&[usize]) -> f64,
    nodes: Vec<RegressionNode>,
}

impl TreeFit<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(RegressionNode::Leaf { value: 0.0 });
        let split = if depth < self.max_depth {
            let mut member = vec![false; self.x.len()];
            for &i in &rows {
                member[i] = true;
            }
            best_split(self.x, self.residual, &member, self.sorted)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[idx] = RegressionNode::Leaf {
                    value: (self.leaf_value)(&rows),
                };
            }
            Some((feature, threshold)) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
                let left = self.build(l, depth + 1);
                let right = self.build(r, depth + 1);
                self.nodes[idx] = RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        idx
    }
}

fn sigmoid(f: f64) -> f64 {
    1.0 / (1.0 + (-f).exp())
}

/// Stagewise additive model on raw scores; each stage fits a regression
/// tree to the negative gradient and sets leaves by a Newton step.
pub(super) fn fit(x: &[Vec<f64>], y: &[Label], p: &BoostingParams) -> Parameters {
    let yb: Vec<f64> = y.iter().map(|l| if l.is_unsafe() { 1.0 } else { 0.0 }).collect();
    let pos = yb.iter().sum::<f64>();
    let neg = yb.len() as f64 - pos;
    let exponential = p.loss == "exponential";
    let init = if exponential { 0.5 * (pos / neg).ln() } else { (pos / neg).ln() };
    let sorted = Presorted::new(x);
    let mut raw = vec![init; x.len()];
    let mut trees = Vec::with_capacity(p.n_estimators);
    for _ in 0..p.n_estimators {
        let residual: Vec<f64> = if exponential {
            yb.iter()
                .zip(&raw)
                .map(|(&t, &f)| {
                    let s = 2.0 * t - 1.0;
                    s * (-s * f).exp()
                })
                .collect()
        } else {
            yb.iter().zip(&raw).map(|(&t, &f)| t - sigmoid(f)).collect()
        };
        let leaf_value = |rows: &[usize]| -> f64 {
            let (num, den) = rows.iter().fold((0.0, 0.0), |(a, b), &i| {
                if exponential {
                    let s = 2.0 * yb[i] - 1.0;
                    let e = (-s * raw[i]).exp();
                    (a + s * e, b + e)
                } else {
                    let q = sigmoid(raw[i]);
                    (a + residual[i], b + q * (1.0 - q))
                }
            });
            if den.abs() < 1e-150 {
                0.0
            } else {
                num / den
            }
        };
        let mut tf = TreeFit {
            x,
            residual: &residual,
            sorted: &sorted,
            max_depth: p.max_depth,
            leaf_value: &leaf_value,
            nodes: Vec::new(),
        };
        tf.build((0..x.len()).collect(), 0);
        let tree = RegressionTree { nodes: tf.nodes };
        for (f, r) in raw.iter_mut().zip(x) {
            *f += p.learning_rate * tree.predict(r);
        }
        trees.push(tree);
    }
    Parameters::Boosting {
        init,
        learning_rate: p.learning_rate,
        trees,
    }
}
