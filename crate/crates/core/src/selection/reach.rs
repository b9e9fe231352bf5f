use serde::{Deserialize, Serialize};

use super::{draw_order, Execution, SelectionError, Strategy, TestPool};
use crate::ml::Confusion;

/// Charged seconds per executed test on top of its drive time, and per
/// prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    pub overhead_s: f64,
    pub prediction_s: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            overhead_s: 10.0,
            prediction_s: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachResult {
    pub strategy: String,
    pub seed: u64,
    pub target: usize,
    pub reached: bool,
    pub executed_count: usize,
    /// Ids in execution order.
    pub executed: Vec<String>,
    pub unsafe_found: usize,
    /// Tests the ML selector skipped as predicted safe.
    pub skipped: usize,
    pub elapsed_cost_safe: f64,
    pub elapsed_cost_unsafe: f64,
    pub prediction_cost: f64,
    pub total_cost: f64,
    pub confusion: Confusion,
}

/// Executes tests in strategy order until `n` unsafe tests have run. The ML
/// selector pays a prediction per draw and executes only predicted-unsafe
/// tests.
pub fn run_reach(
    pool: &TestPool,
    strategy: &Strategy,
    n: usize,
    cost: &CostModel,
    seed: u64,
) -> Result<ReachResult, SelectionError> {
    let available = pool.composition().unsafe_;
    if n > available {
        return Err(SelectionError::NTooLarge { n, available });
    }
    let mut run = Execution::new(pool);
    let mut confusion = Confusion::default();
    let (mut safe_cost, mut unsafe_cost, mut prediction_cost) = (0.0, 0.0, 0.0);
    let mut skipped = 0;
    let mut executed = Vec::new();
    for i in draw_order(pool, strategy, seed) {
        if confusion.tp >= n {
            break;
        }
        if let Strategy::Ml(model) = strategy {
            let t = &pool.tests()[i];
            prediction_cost += cost.prediction_s;
            if !model.predict_case(&t.id, &t.features)?.is_unsafe() {
                skipped += 1;
                continue;
            }
        }
        let (label, duration) = run.execute(i);
        executed.push(pool.tests()[i].id.clone());
        let charged = duration + cost.overhead_s;
        if label.is_unsafe() {
            unsafe_cost += charged;
        } else {
            safe_cost += charged;
        }
        confusion.record(label, crate::Label::Unsafe);
    }
    Ok(ReachResult {
        strategy: strategy.name().to_string(),
        seed,
        target: n,
        reached: confusion.tp >= n,
        executed_count: confusion.total(),
        executed,
        unsafe_found: confusion.tp,
        skipped,
        elapsed_cost_safe: safe_cost,
        elapsed_cost_unsafe: unsafe_cost,
        prediction_cost,
        total_cost: safe_cost + unsafe_cost + prediction_cost,
        confusion,
    })
}
