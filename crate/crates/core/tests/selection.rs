use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use roadsift::features::FeatureVector;
use roadsift::geometry::RoadPoints;
use roadsift::ml::MlError;
use roadsift::oracle::{TestCase, TestOutcome};
use roadsift::selection::{
    build_pool, run_fix, run_reach, Composition, CostModel, MeanStd, Predictor, Strategy, TestPool,
};
use roadsift::Label;

fn case(i: usize, label: Label, length: f64) -> TestCase {
    TestCase {
        id: format!("c{i:04}"),
        road: RoadPoints::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], 4.0, 250.0).unwrap(),
        features: Some(FeatureVector {
            length,
            ..FeatureVector::default()
        }),
        outcome: Some(TestOutcome {
            label,
            duration: 5.0 + (i % 17) as f64,
            max_abs_lateral_offset: 0.0,
            trace: Vec::new(),
        }),
    }
}

/// `unsafe_` unsafe cases first, lengths drawn from `lengths` cyclically.
fn cases(safe: usize, unsafe_: usize, lengths: &[f64]) -> Vec<TestCase> {
    (0..safe + unsafe_)
        .map(|i| case(i, if i < unsafe_ { Label::Unsafe } else { Label::Safe }, lengths[i % lengths.len()]))
        .collect()
}

fn labels(cases: &[TestCase]) -> HashMap<String, Label> {
    cases.iter().map(|c| (c.id.clone(), c.label().unwrap())).collect()
}

fn with_flipped(cases: &[TestCase], keep: &HashSet<String>) -> Vec<TestCase> {
    let mut out = cases.to_vec();
    for c in out.iter_mut().filter(|c| !keep.contains(&c.id)) {
        let o = c.outcome.as_mut().unwrap();
        o.label = if o.label.is_unsafe() { Label::Safe } else { Label::Unsafe };
    }
    out
}

/// Calls anything longer than a threshold unsafe. Sees features only.
struct LongIsRisky(f64);

impl Predictor for LongIsRisky {
    fn predict_case(&self, _id: &str, f: &FeatureVector) -> Result<Label, MlError> {
        Ok(if f.length > self.0 { Label::Unsafe } else { Label::Safe })
    }
}

fn strategies(p: &LongIsRisky) -> [Strategy<'_>; 3] {
    [Strategy::Random, Strategy::RoadLength, Strategy::Ml(p)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fix_suites_are_honest(
        safe in 1usize..60,
        unsafe_ in 1usize..60,
        lengths in prop::collection::vec(10.0f64..500.0, 1..20),
        s_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let all = cases(safe, unsafe_, &lengths);
        let truth = labels(&all);
        let pool = TestPool::from_cases(&all).unwrap();
        let s = (s_frac * pool.len() as f64) as usize;
        let p = LongIsRisky(200.0);
        for strategy in strategies(&p) {
            let r = run_fix(&pool, &strategy, s, seed).unwrap();
            prop_assert_eq!(r.suite.len(), s);
            prop_assert_eq!(r.suite.iter().collect::<HashSet<_>>().len(), s);
            let unsafe_count = r.suite.iter().filter(|id| truth[*id].is_unsafe()).count();
            prop_assert_eq!(r.unsafe_count, unsafe_count);
            prop_assert_eq!(r.revealed, s);
            prop_assert_eq!(r.confusion.total(), s);
            prop_assert_eq!(&r, &run_fix(&pool, &strategy, s, seed).unwrap());
        }
    }

    #[test]
    fn reach_accounts_for_every_second(
        safe in 1usize..60,
        unsafe_ in 1usize..60,
        lengths in prop::collection::vec(10.0f64..500.0, 1..20),
        n_frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let all = cases(safe, unsafe_, &lengths);
        let durations: HashMap<_, _> = all.iter().map(|c| (c.id.clone(), c.outcome.as_ref().unwrap().duration)).collect();
        let truth = labels(&all);
        let pool = TestPool::from_cases(&all).unwrap();
        let n = (n_frac * unsafe_ as f64) as usize;
        let cost = CostModel { overhead_s: 3.0, prediction_s: 0.25 };
        let p = LongIsRisky(200.0);
        for strategy in strategies(&p) {
            let r = run_reach(&pool, &strategy, n, &cost, seed).unwrap();
            prop_assert_eq!(r.executed.len(), r.executed_count);
            prop_assert_eq!(r.executed.iter().collect::<HashSet<_>>().len(), r.executed_count);
            let found = r.executed.iter().filter(|id| truth[*id].is_unsafe()).count();
            prop_assert_eq!(r.unsafe_found, found);
            if r.reached {
                prop_assert_eq!(found, n);
                if n > 0 {
                    prop_assert!(truth[r.executed.last().unwrap()].is_unsafe(), "ran past the target");
                }
            } else {
                prop_assert!(matches!(strategy, Strategy::Ml(_)), "baselines always reach");
            }
            let charged: f64 = r.executed.iter().map(|id| durations[id] + cost.overhead_s).sum();
            let predictions = match strategy {
                Strategy::Ml(_) => r.executed_count + r.skipped,
                _ => 0,
            };
            let expected = charged + predictions as f64 * cost.prediction_s;
            prop_assert!((r.total_cost - expected).abs() <= 1e-9 * expected.max(1.0));
            prop_assert!((r.elapsed_cost_safe + r.elapsed_cost_unsafe + r.prediction_cost - r.total_cost).abs() < 1e-9);
        }
    }
}

/// Verdicts the selector never executed cannot influence what it picks.
#[test]
fn selectors_are_blind_to_unexecuted_verdicts() {
    let all = cases(120, 80, &[50.0, 150.0, 250.0, 350.0, 90.0]);
    let p = LongIsRisky(200.0);
    for seed in 0..20 {
        let pool = build_pool(&all, Composition::new(100, 60), &HashSet::new(), seed).unwrap();
        for strategy in strategies(&p) {
            let r = run_fix(&pool, &strategy, 40, seed).unwrap();
            let keep: HashSet<String> = r.suite.iter().cloned().collect();
            // same tests, same order, other verdicts
            let flipped = same_order(&pool, &with_flipped(&all, &keep));
            assert_eq!(run_fix(&flipped, &strategy, 40, seed).unwrap().suite, r.suite);

            let r = run_reach(&pool, &strategy, 10, &CostModel::default(), seed).unwrap();
            let keep: HashSet<String> = r.executed.iter().cloned().collect();
            let flipped = same_order(&pool, &with_flipped(&all, &keep));
            let again = run_reach(&flipped, &strategy, 10, &CostModel::default(), seed).unwrap();
            assert_eq!(again.executed, r.executed);
        }
    }
}

/// A pool with the tests of `pool`, in its order, taken from `cases`.
fn same_order(pool: &TestPool, cases: &[TestCase]) -> TestPool {
    let by_id: HashMap<&str, &TestCase> = cases.iter().map(|c| (c.id.as_str(), c)).collect();
    let ordered: Vec<TestCase> = pool.ids().iter().map(|id| by_id[id].clone()).collect();
    TestPool::from_cases(&ordered).unwrap()
}

#[test]
fn random_suites_mirror_the_pool() {
    let all = cases(600, 400, &[100.0]);
    let ratios: Vec<f64> = (0..30)
        .map(|seed| {
            let pool = build_pool(&all, Composition::new(600, 400), &HashSet::new(), seed).unwrap();
            run_fix(&pool, &Strategy::Random, 100, seed).unwrap().unsafe_ratio
        })
        .collect();
    let m = MeanStd::of(&ratios);
    assert!((m.mean - 0.40).abs() <= 0.05, "{m:?}");
}

#[test]
fn road_length_takes_the_longest_first() {
    let lengths = [120.0, 80.0, 400.0, 250.0, 250.0, 30.0, 310.0];
    let all = cases(4, 3, &lengths);
    let pool = TestPool::from_cases(&all).unwrap();
    let r = run_fix(&pool, &Strategy::RoadLength, 4, 0).unwrap();
    assert_eq!(r.suite, ["c0002", "c0006", "c0003", "c0004"]);
    // the order ignores the seed
    assert_eq!(run_fix(&pool, &Strategy::RoadLength, 4, 99).unwrap().suite, r.suite);
}
