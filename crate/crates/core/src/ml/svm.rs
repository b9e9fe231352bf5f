use super::logistic::{proximal_descent, Penalty};
use super::{Parameters, SvmParams};
use crate::Label;

fn squared_hinge(m: f64) -> (f64, f64) {
    let h = (1.0 - m).max(0.0);
    (h * h, -2.0 * h)
}

/// Linear SVM in the primal. The objective is the mean (squared) hinge loss
/// plus a penalty scaled by `1 / (C n)`. The squared hinge is smooth and uses
/// proximal gradient descent; the plain hinge uses subgradient steps with a
/// decaying rate, keeping the best iterate seen.
pub(super) fn fit(x: &[Vec<f64>], y: &[Label], p: &SvmParams) -> Parameters {
    let lambda = 1.0 / (p.c * x.len() as f64);
    let pen = if p.penalty == "l1" {
        Penalty { l1: lambda, l2: 0.0 }
    } else {
        Penalty { l1: 0.0, l2: lambda }
    };
    let (weights, bias) = if p.loss == "squared_hinge" {
        proximal_descent(x, y, squared_hinge, pen, p.max_iter, 1e-6)
    } else {
        hinge_subgradient(x, y, pen, p.max_iter)
    };
    Parameters::Linear { weights, bias }
}

fn hinge_objective(x: &[Vec<f64>], s: &[f64], w: &[f64], b: f64, pen: Penalty) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(s)
        .map(|(r, &si)| (1.0 - si * super::linear_score(w, b, r)).max(0.0))
        .sum();
    loss / x.len() as f64
        + 0.5 * pen.l2 * w.iter().map(|v| v * v).sum::<f64>()
        + pen.l1 * w.iter().map(|v| v.abs()).sum::<f64>()
}

fn hinge_subgradient(x: &[Vec<f64>], y: &[Label], pen: Penalty, max_iter: usize) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let d = x[0].len();
    let s: Vec<f64> = y.iter().map(|l| if l.is_unsafe() { 1.0 } else { -1.0 }).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (hinge_objective(x, &s, &w, b, pen), w.clone(), b);
    for t in 1..=max_iter {
        let mut gw: Vec<f64> = w.iter().map(|v| pen.l2 * v + pen.l1 * v.signum()).collect();
        let mut gb = 0.0;
        for (r, &si) in x.iter().zip(&s) {
            if si * super::linear_score(&w, b, r) < 1.0 {
                gb -= si / n;
                for (g, v) in gw.iter_mut().zip(r) {
                    *g -= si * v / n;
                }
            }
        }
        let rate = 1.0 / (t as f64).sqrt();
        for (v, g) in w.iter_mut().zip(&gw) {
            *v -= rate * g;
        }
        b -= rate * gb;
        let obj = hinge_objective(x, &s, &w, b, pen);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
    }
    (best.1, best.2)
}
