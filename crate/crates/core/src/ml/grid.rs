//! Exhaustive hyperparameter grids and their cross-validated evaluation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{kfold_evaluate, ClassifierSpec, Dataset, EvalReport, Family, HyperValue, Hyperparameters, MlError};

/// Value lists of each family's grid, in enumeration order.
pub fn grid_axes(family: Family) -> Vec<(&'static str, Vec<HyperValue>)> {
    fn f(v: &[f64]) -> Vec<HyperValue> {
        v.iter().map(|&x| HyperValue::Float(x)).collect()
    }
    fn i(v: &[i64]) -> Vec<HyperValue> {
        v.iter().map(|&x| HyperValue::Int(x)).collect()
    }
    fn t(v: &[&str]) -> Vec<HyperValue> {
        v.iter().map(|&x| HyperValue::from(x)).collect()
    }
    let yes_no = || vec![HyperValue::from(true), HyperValue::from(false)];
    let min_leaf = [1, 10, 20, 50, 100];
    match family {
        Family::DecisionTree => vec![
            ("C", f(&[0.001, 0.01, 0.05, 0.1, 0.5])),
            ("M", i(&min_leaf)),
            ("R", yes_no()),
            ("S", yes_no()),
        ],
        Family::RandomForest => vec![
            ("I", i(&[5, 10, 100, 1000, 2000])),
            ("K", i(&[0, 10, 100, 500, 1000])),
            ("depth", i(&[0, 5, 10, 20])),
            ("M", i(&min_leaf)),
        ],
        Family::GradientBoosting => vec![
            ("loss", t(&["log_loss", "deviance", "exponential"])),
            ("learning_rate", f(&[0.01, 0.1, 0.2, 0.4])),
            ("n_estimators", i(&[10, 100, 1000])),
            ("criterion", t(&["friedman_mse", "squared_error", "mse"])),
        ],
        Family::Logistic => vec![
            ("penalty", t(&["l1", "l2", "elasticnet", "none"])),
            ("dual", yes_no()),
            ("max_iter", i(&[10, 100, 1000])),
            ("solver", t(&["newton-cg", "lbfgs", "liblinear", "sag", "saga"])),
        ],
        Family::LinearSvm => vec![
            ("penalty", t(&["l1", "l2"])),
            ("loss", t(&["hinge", "squared_hinge"])),
            ("dual", yes_no()),
        ],
        Family::NaiveBayes => Vec::new(),
    }
}

/// Every combination of the family's grid (the cartesian product, last axis
/// varying fastest). Naive Bayes has a single, empty combination.
pub fn enumerate_grid(family: Family) -> Vec<ClassifierSpec> {
    let mut out = vec![Hyperparameters::new()];
    for (name, values) in grid_axes(family) {
        out = out
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut h = base.clone();
                    h.insert(name.to_string(), v.clone());
                    h
                })
            })
            .collect();
    }
    out.into_iter()
        .map(|hyperparameters| ClassifierSpec {
            family,
            hyperparameters,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GridOutcome {
    Evaluated { report: EvalReport },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub spec: ClassifierSpec,
    pub outcome: GridOutcome,
}

impl GridCell {
    pub fn weighted_avg_f1(&self) -> Option<f64> {
        match &self.outcome {
            GridOutcome::Evaluated { report } => Some(report.weighted_avg_f1),
            GridOutcome::Skipped { .. } => None,
        }
    }

    /// Compact `name=value` rendering, sorted by name.
    pub fn describe(&self) -> String {
        describe(&self.spec.hyperparameters)
    }
}

pub fn describe(h: &Hyperparameters) -> String {
    h.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn estimators(h: &Hyperparameters) -> i64 {
    ["I", "n_estimators"]
        .iter()
        .find_map(|k| h.get(*k).and_then(HyperValue::as_i64))
        .unwrap_or(0)
}

fn depth(h: &Hyperparameters) -> i64 {
    match ["depth", "max_depth"].iter().find_map(|k| h.get(*k).and_then(HyperValue::as_i64)) {
        Some(0) => i64::MAX, // unlimited
        Some(d) => d,
        None => 0,
    }
}

/// Ranking order: evaluated cells by weighted F1 (descending), then fewer
/// estimators, shallower depth, and the parameter string; skipped cells last.
pub fn rank_cells(cells: &mut [GridCell]) {
    cells.sort_by(|a, b| {
        let key = |c: &GridCell| (estimators(&c.spec.hyperparameters), depth(&c.spec.hyperparameters), c.describe());
        match (a.weighted_avg_f1(), b.weighted_avg_f1()) {
            (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| key(a).cmp(&key(b))),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => key(a).cmp(&key(b)),
        }
    });
}

/// Cross-validates every grid cell (cells in parallel, identical folds for
/// all cells) and returns them ranked. Incompatible combinations are kept
/// as skipped cells.
pub fn grid_search(family: Family, data: &Dataset, k: usize, seed: u64) -> Result<Vec<GridCell>, MlError> {
    let mut cells = enumerate_grid(family)
        .into_par_iter()
        .map(|spec| {
            let outcome = match spec.resolve() {
                Err(MlError::Incompatible(reason)) => GridOutcome::Skipped { reason },
                Err(e) => return Err(e),
                Ok(_) => GridOutcome::Evaluated {
                    report: kfold_evaluate(data, &spec, k, seed)?,
                },
            };
            Ok(GridCell { spec, outcome })
        })
        .collect::<Result<Vec<_>, MlError>>()?;
    rank_cells(&mut cells);
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(enumerate_grid(Family::DecisionTree).len(), 100);
        assert_eq!(enumerate_grid(Family::RandomForest).len(), 500);
        assert_eq!(enumerate_grid(Family::GradientBoosting).len(), 108);
        assert_eq!(enumerate_grid(Family::Logistic).len(), 120);
        assert_eq!(enumerate_grid(Family::LinearSvm).len(), 8);
        assert_eq!(enumerate_grid(Family::NaiveBayes).len(), 1);
    }

    #[test]
    fn only_declared_pairs_are_incompatible() {
        for family in Family::ALL {
            for spec in enumerate_grid(family) {
                match spec.resolve() {
                    Ok(_) | Err(MlError::Incompatible(_)) => {}
                    Err(e) => panic!("{family} {}: {e}", describe(&spec.hyperparameters)),
                }
            }
        }
        let svm_skipped = enumerate_grid(Family::LinearSvm)
            .iter()
            .filter(|s| s.resolve().is_err())
            .count();
        assert_eq!(svm_skipped, 4);
    }

    #[test]
    fn ranking_tie_breaks() {
        let report = |f1: f64| GridOutcome::Evaluated {
            report: EvalReport {
                weighted_avg_f1: f1,
                ..Default::default()
            },
        };
        let cell = |i: i64, f1: Option<f64>| GridCell {
            spec: ClassifierSpec::new(Family::RandomForest).with("I", i),
            outcome: f1.map_or(GridOutcome::Skipped { reason: "x".into() }, report),
        };
        let mut cells = vec![cell(100, Some(0.8)), cell(5, None), cell(10, Some(0.8)), cell(2000, Some(0.9))];
        rank_cells(&mut cells);
        let order: Vec<i64> = cells.iter().map(|c| estimators(&c.spec.hyperparameters)).collect();
        assert_eq!(order, vec![2000, 10, 100, 5]);
    }
}
