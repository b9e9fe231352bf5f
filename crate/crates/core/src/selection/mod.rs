//! Test selection strategies and the experiment protocols that compare them.
//!
//! Labels of pooled tests stay hidden until a protocol executes a test
//! through an [`Execution`] session, which counts every reveal.

mod fix;
mod reach;
mod realtime;

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::features::FeatureVector;
use crate::ml::{MlError, TrainedClassifier};
use crate::oracle::{OracleError, TestCase};
use crate::Label;

pub use fix::{run_fix, FixResult};
pub use reach::{run_reach, CostModel, ReachResult};
pub use realtime::{
    run_realtime, RealTimeConfig, RealTimeCounts, RealTimeMode, RealTimeResult, TimeAllocation, VirtualClock,
};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("pool needs {needed} {label} tests but only {available} are available")]
    InsufficientClassRows {
        label: Label,
        needed: usize,
        available: usize,
    },
    #[error("suite size {s} exceeds pool size {pool}")]
    STooLarge { s: usize, pool: usize },
    #[error("target of {n} unsafe tests exceeds the {available} unsafe tests in the pool")]
    NTooLarge { n: usize, available: usize },
    #[error("budget too small: {0}")]
    BudgetTooSmall(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Anything that can label a test from its static features.
pub trait Predictor: Sync {
    fn predict_case(&self, id: &str, features: &FeatureVector) -> Result<Label, MlError>;
}

impl Predictor for TrainedClassifier {
    fn predict_case(&self, _id: &str, features: &FeatureVector) -> Result<Label, MlError> {
        self.predict(features)
    }
}

/// Fixed per-test answers; tests not in the table get `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct LookupPredictor {
    pub labels: HashMap<String, Label>,
    pub default: Label,
}

impl Predictor for LookupPredictor {
    fn predict_case(&self, id: &str, _features: &FeatureVector) -> Result<Label, MlError> {
        Ok(self.labels.get(id).copied().unwrap_or(self.default))
    }
}

/// Declared safe/unsafe counts of a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub safe: usize,
    #[serde(rename = "unsafe")]
    pub unsafe_: usize,
}

impl Composition {
    pub fn new(safe: usize, unsafe_: usize) -> Self {
        Composition { safe, unsafe_ }
    }

    /// `total` tests of which `unsafe_percent` percent (rounded) are unsafe.
    pub fn scaled(total: usize, unsafe_percent: f64) -> Self {
        let u = (total as f64 * unsafe_percent / 100.0).round() as usize;
        Composition::new(total - u, u)
    }

    pub fn total(&self) -> usize {
        self.safe + self.unsafe_
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.safe, self.unsafe_)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolTest {
    pub id: String,
    pub features: FeatureVector,
    label: Label,
    duration: f64,
}

/// Tests available for selection with their hidden verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct TestPool {
    tests: Vec<PoolTest>,
    composition: Composition,
}

impl TestPool {
    /// Pool straight from labeled cases, in the given order.
    pub fn from_cases(cases: &[TestCase]) -> Result<Self, SelectionError> {
        let mut tests = Vec::with_capacity(cases.len());
        for c in cases {
            let (Some(features), Some(outcome)) = (c.features, c.outcome.as_ref()) else {
                return Err(SelectionError::InvalidConfig(format!("test {} is not labeled", c.id)));
            };
            tests.push(PoolTest {
                id: c.id.clone(),
                features,
                label: outcome.label,
                duration: outcome.duration,
            });
        }
        let u = tests.iter().filter(|t| t.label.is_unsafe()).count();
        Ok(TestPool {
            composition: Composition::new(tests.len() - u, u),
            tests,
        })
    }

    pub fn tests(&self) -> &[PoolTest] {
        &self.tests
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    pub fn composition(&self) -> Composition {
        self.composition
    }

    pub fn ids(&self) -> Vec<&str> {
        self.tests.iter().map(|t| t.id.as_str()).collect()
    }
}

/// Samples exactly `composition` tests (per class, without replacement)
/// from labeled cases whose ids are not in `exclude`. Pool order is shuffled.
pub fn build_pool(
    cases: &[TestCase],
    composition: Composition,
    exclude: &HashSet<String>,
    seed: u64,
) -> Result<TestPool, SelectionError> {
    let all = TestPool::from_cases(cases)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(composition.total());
    for (label, needed) in [(Label::Safe, composition.safe), (Label::Unsafe, composition.unsafe_)] {
        let mut candidates: Vec<&PoolTest> = all
            .tests
            .iter()
            .filter(|t| t.label == label && !exclude.contains(&t.id))
            .collect();
        if candidates.len() < needed {
            return Err(SelectionError::InsufficientClassRows {
                label,
                needed,
                available: candidates.len(),
            });
        }
        candidates.shuffle(&mut rng);
        chosen.extend(candidates.into_iter().take(needed).cloned());
    }
    chosen.shuffle(&mut rng);
    Ok(TestPool {
        tests: chosen,
        composition,
    })
}

/// A protocol run's view of a pool: the only way to learn a verdict.
pub struct Execution<'a> {
    pool: &'a TestPool,
    revealed: Vec<bool>,
}

impl<'a> Execution<'a> {
    pub fn new(pool: &'a TestPool) -> Self {
        Execution {
            pool,
            revealed: vec![false; pool.len()],
        }
    }

    /// Runs test `i`: returns its verdict and drive time.
    pub fn execute(&mut self, i: usize) -> (Label, f64) {
        self.revealed[i] = true;
        let t = &self.pool.tests[i];
        (t.label, t.duration)
    }

    pub fn revealed_count(&self) -> usize {
        self.revealed.iter().filter(|&&r| r).count()
    }
}

#[derive(Clone, Copy)]
pub enum Strategy<'a> {
    Random,
    /// Longest roads first, ties by id.
    RoadLength,
    /// Random draws, kept only when predicted unsafe.
    Ml(&'a dyn Predictor),
}

impl Strategy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::RoadLength => "road_length",
            Strategy::Ml(_) => "ml",
        }
    }
}

impl fmt::Debug for Strategy<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Order in which a strategy considers pool tests.
pub(crate) fn draw_order(pool: &TestPool, strategy: &Strategy, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.len()).collect();
    match strategy {
        Strategy::RoadLength => order.sort_by(|&a, &b| {
            let (ta, tb) = (&pool.tests[a], &pool.tests[b]);
            tb.features.length.total_cmp(&ta.features.length).then_with(|| ta.id.cmp(&tb.id))
        }),
        Strategy::Random | Strategy::Ml(_) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    order
}

/// Failing/passing ratio of executed tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEffectiveness {
    pub failing: usize,
    pub passing: usize,
}

impl CostEffectiveness {
    /// `failing / passing`; infinite when nothing passed but something failed.
    pub fn ratio(&self) -> f64 {
        match (self.failing, self.passing) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            (f, p) => f as f64 / p as f64,
        }
    }

    pub fn failing_percent(&self) -> f64 {
        let n = self.failing + self.passing;
        if n == 0 {
            0.0
        } else {
            100.0 * self.failing as f64 / n as f64
        }
    }
}

impl fmt::Display for CostEffectiveness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.ratio();
        if r.is_infinite() {
            write!(f, "inf ({:.0}%)", self.failing_percent())
        } else {
            write!(f, "{r:.1} ({:.0}%)", self.failing_percent())
        }
    }
}

pub fn cost_effectiveness(executed: &[Label]) -> CostEffectiveness {
    let failing = executed.iter().filter(|l| l.is_unsafe()).count();
    CostEffectiveness {
        failing,
        passing: executed.len() - failing,
    }
}

/// Mean and sample standard deviation over repetitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanStd { mean: 0.0, std: 0.0, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std, n }
    }
}

/// Runs one repetition per seed in parallel; results keep seed order.
pub fn repeat<T, F>(seeds: &[u64], run: F) -> Result<Vec<T>, SelectionError>
where
    T: Send,
    F: Fn(u64) -> Result<T, SelectionError> + Sync,
{
    seeds.par_iter().map(|&s| run(s)).collect()
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `wins + losses` fair coin flips. Ties are dropped by the caller.
pub fn sign_test_p(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    1.0 - b.cdf(wins as u64 - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::TestOutcome;
    use crate::geometry::RoadPoints;

    pub(crate) fn case(i: usize, label: Label, length: f64) -> TestCase {
        let features = FeatureVector {
            length,
            ..FeatureVector::default()
        };
        TestCase {
            id: format!("t{i:03}"),
            road: RoadPoints {
                points: vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
                lane_width: 4.0,
                map_size: 250.0,
            },
            features: Some(features),
            outcome: Some(TestOutcome {
                label,
                duration: 20.0 + i as f64,
                max_abs_lateral_offset: 0.0,
                trace: Vec::new(),
            }),
        }
    }

    #[test]
    fn pool_has_declared_composition() {
        let cases: Vec<TestCase> = (0..100)
            .map(|i| case(i, if i % 4 == 0 { Label::Unsafe } else { Label::Safe }, i as f64))
            .collect();
        let pool = build_pool(&cases, Composition::new(30, 10), &HashSet::new(), 1).unwrap();
        assert_eq!(pool.len(), 40);
        let mut run = Execution::new(&pool);
        let u = (0..40).filter(|&i| run.execute(i).0.is_unsafe()).count();
        assert_eq!(u, 10);
        assert!(matches!(
            build_pool(&cases, Composition::new(10, 26), &HashSet::new(), 1),
            Err(SelectionError::InsufficientClassRows { needed: 26, available: 25, .. })
        ));
    }

    #[test]
    fn pool_excludes_training_ids() {
        let cases: Vec<TestCase> = (0..20).map(|i| case(i, if i < 10 { Label::Unsafe } else { Label::Safe }, 1.0)).collect();
        let exclude: HashSet<String> = (0..5).map(|i| format!("t{i:03}")).collect();
        let pool = build_pool(&cases, Composition::new(10, 5), &exclude, 3).unwrap();
        assert!(pool.ids().iter().all(|id| !exclude.contains(*id)));
    }

    #[test]
    fn composition_scaling() {
        assert_eq!(Composition::scaled(300, 5.0), Composition::new(285, 15));
        assert_eq!(Composition::scaled(300, 70.0), Composition::new(90, 210));
    }

    #[test]
    fn road_length_order() {
        let cases = vec![case(0, Label::Safe, 10.0), case(1, Label::Safe, 30.0), case(2, Label::Safe, 30.0)];
        let pool = TestPool::from_cases(&cases).unwrap();
        assert_eq!(draw_order(&pool, &Strategy::RoadLength, 0), vec![1, 2, 0]);
    }

    #[test]
    fn cost_effectiveness_cases() {
        let mut labels = vec![Label::Unsafe; 8];
        labels.extend([Label::Safe; 2]);
        let ce = cost_effectiveness(&labels);
        assert_eq!(ce.ratio(), 4.0);
        assert_eq!(ce.failing_percent(), 80.0);
        assert_eq!(cost_effectiveness(&[Label::Safe]).ratio(), 0.0);
        let all = cost_effectiveness(&[Label::Unsafe; 3]);
        assert!(all.ratio().is_infinite());
        assert_eq!(all.failing_percent(), 100.0);
        assert_eq!(all.to_string(), "inf (100%)");
    }

    #[test]
    fn sign_test_values() {
        assert!((sign_test_p(30, 0) - 0.5f64.powi(30)).abs() < 1e-15);
        assert!((sign_test_p(1, 1) - 0.75).abs() < 1e-12);
        assert_eq!(sign_test_p(0, 5), 1.0);
    }

    #[test]
    fn mean_std_sample() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
