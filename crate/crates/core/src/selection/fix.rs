use serde::{Deserialize, Serialize};

use super::{draw_order, Execution, SelectionError, Strategy, TestPool};
use crate::ml::Confusion;
use crate::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixResult {
    pub strategy: String,
    pub seed: u64,
    pub suite: Vec<String>,
    pub unsafe_count: usize,
    pub unsafe_ratio: f64,
    /// Suite verdicts against the selector's opinion; baseline picks count
    /// as predicted unsafe, backfilled tests as predicted safe.
    pub confusion: Confusion,
    /// Tests added from the rejected list after the pool ran dry.
    pub backfilled: usize,
    pub revealed: usize,
}

/// Builds a suite of `s` tests. Baselines take the first `s` tests of their
/// order; the ML selector walks a random order and keeps only tests it
/// predicts unsafe, backfilling from its rejections if the pool runs out.
pub fn run_fix(pool: &TestPool, strategy: &Strategy, s: usize, seed: u64) -> Result<FixResult, SelectionError> {
    if s > pool.len() {
        return Err(SelectionError::STooLarge { s, pool: pool.len() });
    }
    let order = draw_order(pool, strategy, seed);
    let mut picks: Vec<(usize, Label)> = Vec::with_capacity(s);
    match strategy {
        Strategy::Random | Strategy::RoadLength => {
            picks.extend(order.iter().take(s).map(|&i| (i, Label::Unsafe)));
        }
        Strategy::Ml(model) => {
            let mut rejected = Vec::new();
            for &i in &order {
                if picks.len() == s {
                    break;
                }
                let t = &pool.tests()[i];
                if model.predict_case(&t.id, &t.features)?.is_unsafe() {
                    picks.push((i, Label::Unsafe));
                } else {
                    rejected.push(i);
                }
            }
            let missing = s - picks.len();
            picks.extend(rejected.into_iter().take(missing).map(|i| (i, Label::Safe)));
        }
    }
    let mut run = Execution::new(pool);
    let mut confusion = Confusion::default();
    for &(i, predicted) in &picks {
        let (actual, _) = run.execute(i);
        confusion.record(actual, predicted);
    }
    let unsafe_count = confusion.tp + confusion.fn_;
    Ok(FixResult {
        strategy: strategy.name().to_string(),
        seed,
        suite: picks.iter().map(|&(i, _)| pool.tests()[i].id.clone()).collect(),
        unsafe_count,
        unsafe_ratio: if s == 0 { 0.0 } else { unsafe_count as f64 / s as f64 },
        confusion,
        backfilled: picks.iter().filter(|p| p.1 == Label::Safe).count(),
        revealed: run.revealed_count(),
    })
}
