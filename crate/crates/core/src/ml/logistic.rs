use super::{LogisticParams, Parameters};
use crate::Label;

/// Margin loss and its derivative with respect to the margin.
pub(super) type MarginLoss = fn(f64) -> (f64, f64);

pub(super) fn logistic_loss(m: f64) -> (f64, f64) {
    // log(1 + e^-m) computed without overflow
    let loss = if m > 0.0 { (-m).exp().ln_1p() } else { -m + m.exp().ln_1p() };
    (loss, -1.0 / (1.0 + m.exp()))
}

/// Penalty weights of the objective `mean loss + l2/2 |w|^2 + l1 |w|_1`.
#[derive(Debug, Clone, Copy)]
pub(super) struct Penalty {
    pub l1: f64,
    pub l2: f64,
}

fn signs(y: &[Label]) -> Vec<f64> {
    y.iter().map(|l| if l.is_unsafe() { 1.0 } else { -1.0 }).collect()
}

fn smooth_objective(x: &[Vec<f64>], s: &[f64], w: &[f64], b: f64, loss: MarginLoss, pen: Penalty) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(s)
        .map(|(r, &si)| loss(si * super::linear_score(w, b, r)).0)
        .sum();
    data / n + 0.5 * pen.l2 * w.iter().map(|v| v * v).sum::<f64>()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Full-batch proximal gradient descent with backtracking line search. The
/// bias is never penalized. Stops once no coordinate moves more than `tol`.
pub(super) fn proximal_descent(
    x: &[Vec<f64>],
    y: &[Label],
    loss: MarginLoss,
    pen: Penalty,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let d = x[0].len();
    let s = signs(y);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut step = 1.0;
    for _ in 0..max_iter {
        let mut gw: Vec<f64> = w.iter().map(|v| pen.l2 * v).collect();
        let mut gb = 0.0;
        for (r, &si) in x.iter().zip(&s) {
            let (_, dm) = loss(si * super::linear_score(&w, b, r));
            let c = dm * si / n;
            gb += c;
            for (g, v) in gw.iter_mut().zip(r) {
                *g += c * v;
            }
        }
        let f0 = smooth_objective(x, &s, &w, b, loss, pen);
        step *= 2.0;
        let (nw, nb) = loop {
            let nw: Vec<f64> = w
                .iter()
                .zip(&gw)
                .map(|(v, g)| soft_threshold(v - step * g, step * pen.l1))
                .collect();
            let nb = b - step * gb;
            let dw: f64 = nw.iter().zip(&w).zip(&gw).map(|((a, o), g)| (a - o) * g).sum::<f64>() + (nb - b) * gb;
            let dist: f64 = nw.iter().zip(&w).map(|(a, o)| (a - o).powi(2)).sum::<f64>() + (nb - b).powi(2);
            let f1 = smooth_objective(x, &s, &nw, nb, loss, pen);
            if f1 <= f0 + dw + dist / (2.0 * step) + 1e-15 || step < 1e-12 {
                break (nw, nb);
            }
            step *= 0.5;
        };
        let moved = nw
            .iter()
            .zip(&w)
            .map(|(a, o)| (a - o).abs())
            .fold((nb - b).abs(), f64::max);
        w = nw;
        b = nb;
        if moved <= tol {
            break;
        }
    }
    (w, b)
}

/// Regularized logistic regression. The objective is the mean log-loss plus
/// a penalty scaled by `1 / (C n)`; solver and dual only label the run.
pub(super) fn fit(x: &[Vec<f64>], y: &[Label], p: &LogisticParams) -> Parameters {
    let lambda = 1.0 / (p.c * x.len() as f64);
    let pen = match p.penalty {
        "l1" => Penalty { l1: lambda, l2: 0.0 },
        "l2" => Penalty { l1: 0.0, l2: lambda },
        "elasticnet" => Penalty {
            l1: lambda * p.l1_ratio,
            l2: lambda * (1.0 - p.l1_ratio),
        },
        _ => Penalty { l1: 0.0, l2: 0.0 },
    };
    let (weights, bias) = proximal_descent(x, y, logistic_loss, pen, p.max_iter, 1e-6);
    Parameters::Linear { weights, bias }
}
