//! Classifiers that label a road's feature vector safe or unsafe.
//!
//! Six families are implemented from scratch: logistic regression, Gaussian
//! naive Bayes, a gain-based decision tree with C4.5-style pruning knobs, a
//! random forest, a linear SVM and gradient-boosted regression trees.
//! Features are standardized with the training mean/stddev before fitting.

mod boosting;
mod data;
pub mod grid;
mod logistic;
mod metrics;
mod naive_bayes;
mod persist;
mod ranking;
mod sampling;
mod svm;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::Label;

pub use boosting::{RegressionNode, RegressionTree};
pub use data::{Dataset, Standardization};
pub use grid::{enumerate_grid, grid_search, GridCell, GridOutcome};
pub use metrics::{ClassMetrics, Confusion, EvalReport};
pub use persist::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};
pub use ranking::{
    equal_frequency_bins, information_gain, pearson_abs, rank_features, FeatureRanking, RankedFeature,
    CORRELATION_THRESHOLD, INFORMATION_GAIN_THRESHOLD,
};
pub use sampling::{
    kfold_evaluate, kfold_evaluate_with, oversample_minority, split, stratified_folds,
};
pub use tree::{ClassTree, Split, TreeNode};

#[derive(Debug, Error)]
pub enum MlError {
    #[error("dataset contains a single class")]
    SingleClassDataset,
    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),
    #[error("split leaves an empty side")]
    EmptySplit,
    #[error("need at least {needed} rows for {k}-fold cross-validation, have {have}")]
    TooFewRows { needed: usize, have: usize, k: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("incompatible hyperparameters: {0}")]
    Incompatible(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("corrupt model file: {0}")]
    CorruptModelFile(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    NaiveBayes,
    DecisionTree,
    RandomForest,
    LinearSvm,
    GradientBoosting,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Logistic,
        Family::NaiveBayes,
        Family::DecisionTree,
        Family::RandomForest,
        Family::LinearSvm,
        Family::GradientBoosting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::NaiveBayes => "naive_bayes",
            Family::DecisionTree => "decision_tree",
            Family::RandomForest => "random_forest",
            Family::LinearSvm => "linear_svm",
            Family::GradientBoosting => "gradient_boosting",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        Ok(match norm.as_str() {
            "logistic" | "logistic_regression" => Family::Logistic,
            "naive_bayes" | "nb" | "bayes" => Family::NaiveBayes,
            "decision_tree" | "j48" | "tree" => Family::DecisionTree,
            "random_forest" | "rf" | "forest" => Family::RandomForest,
            "linear_svm" | "svm" => Family::LinearSvm,
            "gradient_boosting" | "boosting" | "gb" => Family::GradientBoosting,
            _ => return Err(MlError::InvalidHyperparameter(format!("unknown model family {s:?}"))),
        })
    }
}

/// A hyperparameter value as it appears in grids and model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl HyperValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            HyperValue::Int(i) => Some(i as f64),
            HyperValue::Float(f) => Some(f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            HyperValue::Int(i) => Some(i),
            HyperValue::Float(f) if f.fract() == 0.0 => Some(f as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            HyperValue::Bool(b) => Some(*b),
            HyperValue::Text(t) => match t.to_ascii_lowercase().as_str() {
                "yes" | "true" => Some(true),
                "no" | "false" => Some(false),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            HyperValue::Text(t) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Bool(b) => write!(f, "{b}"),
            HyperValue::Int(i) => write!(f, "{i}"),
            HyperValue::Float(x) => write!(f, "{x}"),
            HyperValue::Text(t) => f.write_str(t),
        }
    }
}

impl From<bool> for HyperValue {
    fn from(v: bool) -> Self {
        HyperValue::Bool(v)
    }
}
impl From<i64> for HyperValue {
    fn from(v: i64) -> Self {
        HyperValue::Int(v)
    }
}
impl From<f64> for HyperValue {
    fn from(v: f64) -> Self {
        HyperValue::Float(v)
    }
}
impl From<&str> for HyperValue {
    fn from(v: &str) -> Self {
        HyperValue::Text(v.to_string())
    }
}

pub type Hyperparameters = BTreeMap<String, HyperValue>;

/// Model family plus (possibly partial) hyperparameters; missing entries
/// take the family defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub family: Family,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
}

impl ClassifierSpec {
    pub fn new(family: Family) -> Self {
        ClassifierSpec {
            family,
            hyperparameters: Hyperparameters::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<HyperValue>) -> Self {
        self.hyperparameters.insert(name.to_string(), value.into());
        self
    }

    /// Parses and range-checks the hyperparameters, then rejects
    /// combinations the family cannot train.
    pub fn resolve(&self) -> Result<ResolvedParams, MlError> {
        let params = ResolvedParams::parse(self)?;
        if let Some(reason) = params.incompatibility() {
            return Err(MlError::Incompatible(reason));
        }
        Ok(params)
    }
}

struct ParamReader<'a> {
    family: Family,
    map: &'a Hyperparameters,
    known: &'static [&'static str],
}

impl<'a> ParamReader<'a> {
    fn check_names(&self) -> Result<(), MlError> {
        for name in self.map.keys() {
            if !self.known.contains(&name.as_str()) {
                return Err(MlError::InvalidHyperparameter(format!(
                    "{} has no hyperparameter {name:?}",
                    self.family
                )));
            }
        }
        Ok(())
    }

    fn invalid(&self, name: &str, why: &str) -> MlError {
        MlError::InvalidHyperparameter(format!("{}.{name}: {why}", self.family))
    }

    fn float(&self, name: &str, default: f64, ok: impl Fn(f64) -> bool) -> Result<f64, MlError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|&x| ok(x))
                .ok_or_else(|| self.invalid(name, &format!("value {v} out of domain"))),
        }
    }

    fn int(&self, name: &str, default: usize, min: usize) -> Result<usize, MlError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_i64()
                .filter(|&x| x >= min as i64)
                .map(|x| x as usize)
                .ok_or_else(|| self.invalid(name, &format!("value {v} must be an integer >= {min}"))),
        }
    }

    fn boolean(&self, name: &str, default: bool) -> Result<bool, MlError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.invalid(name, &format!("value {v} is not yes/no"))),
        }
    }

    fn choice(&self, name: &str, default: &'static str, options: &[&'static str]) -> Result<&'static str, MlError> {
        match self.map.get(name) {
            None => Ok(default),
            Some(v) => {
                let text = v.to_string();
                options
                    .iter()
                    .find(|o| o.eq_ignore_ascii_case(&text))
                    .copied()
                    .ok_or_else(|| self.invalid(name, &format!("{text:?} not in {options:?}")))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub confidence: f64,
    pub min_leaf: usize,
    pub reduced_error_pruning: bool,
    pub subtree_raising: bool,
    pub max_depth: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub trees: usize,
    pub features_per_split: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingParams {
    pub loss: &'static str,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub criterion: &'static str,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticParams {
    pub penalty: &'static str,
    pub dual: bool,
    pub max_iter: usize,
    pub solver: &'static str,
    pub c: f64,
    pub l1_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub penalty: &'static str,
    pub loss: &'static str,
    pub dual: bool,
    pub c: f64,
    pub max_iter: usize,
}

/// Hyperparameters with defaults filled in and domains checked.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedParams {
    Logistic(LogisticParams),
    NaiveBayes,
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    LinearSvm(SvmParams),
    GradientBoosting(BoostingParams),
}

impl ResolvedParams {
    fn parse(spec: &ClassifierSpec) -> Result<Self, MlError> {
        let known: &'static [&'static str] = match spec.family {
            Family::Logistic => &["penalty", "dual", "max_iter", "solver", "C", "l1_ratio"],
            Family::NaiveBayes => &[],
            Family::DecisionTree => &["C", "M", "R", "S", "max_depth", "seed"],
            Family::RandomForest => &["I", "K", "depth", "M", "bootstrap", "seed"],
            Family::LinearSvm => &["penalty", "loss", "dual", "C", "max_iter"],
            Family::GradientBoosting => &["loss", "learning_rate", "n_estimators", "criterion", "max_depth"],
        };
        let r = ParamReader {
            family: spec.family,
            map: &spec.hyperparameters,
            known,
        };
        r.check_names()?;
        Ok(match spec.family {
            Family::Logistic => ResolvedParams::Logistic(LogisticParams {
                penalty: r.choice("penalty", "l2", &["l1", "l2", "elasticnet", "none"])?,
                dual: r.boolean("dual", false)?,
                max_iter: r.int("max_iter", 1000, 1)?,
                solver: r.choice("solver", "lbfgs", &["newton-cg", "lbfgs", "liblinear", "sag", "saga"])?,
                c: r.float("C", 1.0, |x| x > 0.0 && x.is_finite())?,
                l1_ratio: r.float("l1_ratio", 0.5, |x| (0.0..=1.0).contains(&x))?,
            }),
            Family::NaiveBayes => ResolvedParams::NaiveBayes,
            Family::DecisionTree => ResolvedParams::DecisionTree(TreeParams {
                confidence: r.float("C", 0.25, |x| x > 0.0 && x <= 0.5)?,
                min_leaf: r.int("M", 2, 1)?,
                reduced_error_pruning: r.boolean("R", false)?,
                subtree_raising: r.boolean("S", true)?,
                max_depth: r.int("max_depth", 0, 0)?,
                seed: r.int("seed", 1, 0)? as u64,
            }),
            Family::RandomForest => ResolvedParams::RandomForest(ForestParams {
                trees: r.int("I", 100, 1)?,
                features_per_split: r.int("K", 0, 0)?,
                max_depth: r.int("depth", 0, 0)?,
                min_leaf: r.int("M", 1, 1)?,
                bootstrap: r.boolean("bootstrap", true)?,
                seed: r.int("seed", 1, 0)? as u64,
            }),
            Family::LinearSvm => ResolvedParams::LinearSvm(SvmParams {
                penalty: r.choice("penalty", "l2", &["l1", "l2"])?,
                loss: r.choice("loss", "squared_hinge", &["hinge", "squared_hinge"])?,
                dual: r.boolean("dual", true)?,
                c: r.float("C", 1.0, |x| x > 0.0 && x.is_finite())?,
                max_iter: r.int("max_iter", 1000, 1)?,
            }),
            Family::GradientBoosting => ResolvedParams::GradientBoosting(BoostingParams {
                loss: r.choice("loss", "log_loss", &["log_loss", "deviance", "exponential"])?,
                learning_rate: r.float("learning_rate", 0.1, |x| x > 0.0 && x.is_finite())?,
                n_estimators: r.int("n_estimators", 100, 1)?,
                criterion: r.choice("criterion", "friedman_mse", &["friedman_mse", "squared_error", "mse"])?,
                max_depth: r.int("max_depth", 3, 1)?,
            }),
        })
    }

    /// Reason why this combination cannot be trained, mirroring the
    /// constraints of the reference solver implementations.
    fn incompatibility(&self) -> Option<String> {
        match self {
            ResolvedParams::Logistic(p) => {
                let solver_ok = match p.solver {
                    "newton-cg" | "lbfgs" | "sag" => matches!(p.penalty, "l2" | "none"),
                    "liblinear" => matches!(p.penalty, "l1" | "l2"),
                    _ => true, // saga supports every penalty
                };
                if !solver_ok {
                    return Some(format!("solver {} does not support penalty {}", p.solver, p.penalty));
                }
                if p.dual && !(p.solver == "liblinear" && p.penalty == "l2") {
                    return Some("dual formulation requires liblinear with l2 penalty".into());
                }
                None
            }
            ResolvedParams::LinearSvm(p) => match (p.penalty, p.loss, p.dual) {
                ("l1", "hinge", _) => Some("l1 penalty with hinge loss is not supported".into()),
                ("l1", "squared_hinge", true) => Some("l1 penalty requires the primal formulation".into()),
                ("l2", "hinge", false) => Some("hinge loss requires the dual formulation".into()),
                _ => None,
            },
            _ => None,
        }
    }
}

/// Family-specific learned state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Parameters {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    NaiveBayes {
        /// Index 0 = safe, 1 = unsafe.
        log_priors: [f64; 2],
        means: [Vec<f64>; 2],
        variances: [Vec<f64>; 2],
    },
    Tree {
        tree: ClassTree,
    },
    Forest {
        trees: Vec<ClassTree>,
    },
    Boosting {
        init: f64,
        learning_rate: f64,
        trees: Vec<boosting::RegressionTree>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    pub feature_names: Vec<String>,
    pub standardization: Standardization,
    pub parameters: Parameters,
}

/// Fits a classifier of the given spec on `train`.
pub fn fit(spec: &ClassifierSpec, train: &Dataset) -> Result<TrainedClassifier, MlError> {
    let params = spec.resolve()?;
    let counts = train.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(MlError::SingleClassDataset);
    }
    let standardization = Standardization::fit(&train.rows);
    let x: Vec<Vec<f64>> = train.rows.iter().map(|r| standardization.apply(r)).collect();
    let y = &train.labels;
    let parameters = match &params {
        ResolvedParams::Logistic(p) => logistic::fit(&x, y, p),
        ResolvedParams::NaiveBayes => naive_bayes::fit(&x, y),
        ResolvedParams::DecisionTree(p) => Parameters::Tree {
            tree: tree::fit_pruned(&x, y, p),
        },
        ResolvedParams::RandomForest(p) => Parameters::Forest {
            trees: tree::fit_forest(&x, y, p),
        },
        ResolvedParams::LinearSvm(p) => svm::fit(&x, y, p),
        ResolvedParams::GradientBoosting(p) => boosting::fit(&x, y, p),
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        feature_names: train.feature_names.clone(),
        standardization,
        parameters,
    })
}

impl TrainedClassifier {
    /// Decision score; positive means unsafe.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let x = self.standardization.apply(row);
        match &self.parameters {
            Parameters::Linear { weights, bias } => linear_score(weights, *bias, &x),
            Parameters::NaiveBayes {
                log_priors,
                means,
                variances,
            } => naive_bayes::log_odds(log_priors, means, variances, &x),
            Parameters::Tree { tree } => tree.unsafe_share(&x) - 0.5,
            Parameters::Forest { trees } => {
                let votes = trees.iter().filter(|t| t.predict(&x).is_unsafe()).count() as f64;
                votes / trees.len() as f64 - 0.5
            }
            Parameters::Boosting {
                init,
                learning_rate,
                trees,
            } => init + learning_rate * trees.iter().map(|t| t.predict(&x)).sum::<f64>(),
        }
    }

    /// Label for a raw feature row in `feature_names` order. Ties go to unsafe.
    pub fn predict_row(&self, row: &[f64]) -> Label {
        if self.score_row(row) >= 0.0 {
            Label::Unsafe
        } else {
            Label::Safe
        }
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<Label, MlError> {
        let row = self
            .feature_names
            .iter()
            .map(|n| {
                features
                    .get(n)
                    .ok_or_else(|| MlError::FeatureMismatch(format!("model expects unknown feature {n:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.predict_row(&row))
    }

    /// Predicts every row of a dataset whose columns may be ordered differently.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Label>, MlError> {
        let index: Vec<usize> = self
            .feature_names
            .iter()
            .map(|n| {
                data.feature_names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| MlError::FeatureMismatch(format!("dataset lacks feature {n:?}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(data
            .rows
            .iter()
            .map(|r| {
                let row: Vec<f64> = index.iter().map(|&i| r[i]).collect();
                self.predict_row(&row)
            })
            .collect())
    }
}

pub(crate) fn linear_score(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
}

/// Default spec of every family, in [`Family::ALL`] order.
pub fn default_specs() -> Vec<ClassifierSpec> {
    Family::ALL.iter().map(|&f| ClassifierSpec::new(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_aliases_parse() {
        assert_eq!("j48".parse::<Family>().unwrap(), Family::DecisionTree);
        assert_eq!("Random-Forest".parse::<Family>().unwrap(), Family::RandomForest);
        assert_eq!("svm".parse::<Family>().unwrap(), Family::LinearSvm);
        assert!("perceptron".parse::<Family>().is_err());
    }

    #[test]
    fn unknown_hyperparameter_rejected() {
        let spec = ClassifierSpec::new(Family::DecisionTree).with("gamma", 1.0);
        assert!(matches!(spec.resolve(), Err(MlError::InvalidHyperparameter(_))));
        let spec = ClassifierSpec::new(Family::DecisionTree).with("C", 0.9);
        assert!(matches!(spec.resolve(), Err(MlError::InvalidHyperparameter(_))));
    }

    #[test]
    fn incompatible_pairs_detected() {
        let lbfgs_l1 = ClassifierSpec::new(Family::Logistic)
            .with("penalty", "l1")
            .with("solver", "lbfgs");
        assert!(matches!(lbfgs_l1.resolve(), Err(MlError::Incompatible(_))));
        let svm = ClassifierSpec::new(Family::LinearSvm)
            .with("penalty", "l1")
            .with("loss", "hinge");
        assert!(matches!(svm.resolve(), Err(MlError::Incompatible(_))));
        let ok = ClassifierSpec::new(Family::LinearSvm)
            .with("penalty", "l1")
            .with("loss", "squared_hinge")
            .with("dual", false);
        assert!(ok.resolve().is_ok());
    }

    #[test]
    fn yes_no_strings_are_booleans() {
        let spec = ClassifierSpec::new(Family::DecisionTree).with("R", "yes").with("S", "no");
        let ResolvedParams::DecisionTree(p) = spec.resolve().unwrap() else { panic!() };
        assert!(p.reduced_error_pruning && !p.subtree_raising);
    }
}
