use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Predictor, SelectionError};
use crate::derive_seed;
use crate::ml::{fit, oversample_minority, ClassifierSpec, Confusion, Dataset, TrainedClassifier};
use crate::oracle::{build_case, DriverConfig, GeneratorBounds, TestCase};
use crate::Label;

/// Fixed charges, in seconds, of the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirtualClock {
    pub generation_s: f64,
    pub prediction_s: f64,
    pub retraining_s: f64,
    /// Added to every execution's drive time.
    pub overhead_s: f64,
}

impl Default for VirtualClock {
    fn default() -> Self {
        VirtualClock {
            generation_s: 1.0,
            prediction_s: 0.05,
            retraining_s: 3.0,
            overhead_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealTimeConfig {
    pub budget_s: f64,
    pub clock: VirtualClock,
    pub driver: DriverConfig,
    pub bounds: GeneratorBounds,
}

impl Default for RealTimeConfig {
    fn default() -> Self {
        RealTimeConfig {
            budget_s: 7200.0,
            clock: VirtualClock::default(),
            driver: DriverConfig::with_risk_factor(1.5),
            bounds: GeneratorBounds::default(),
        }
    }
}

#[derive(Clone, Copy)]
pub enum RealTimeMode<'a> {
    /// Executes every generated test.
    Baseline,
    PreTrained(&'a dyn Predictor),
    /// Executes the first `warmup` tests (more if a class is still missing),
    /// then retrains on all executed tests after every `retrain_every`
    /// executions.
    Adaptive {
        spec: &'a ClassifierSpec,
        warmup: usize,
        retrain_every: usize,
    },
}

impl RealTimeMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            RealTimeMode::Baseline => "baseline",
            RealTimeMode::PreTrained(_) => "pre_trained",
            RealTimeMode::Adaptive { .. } => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RealTimeCounts {
    pub generated: usize,
    /// Executed after prediction; warmup executions are counted separately.
    pub executed_unsafe: usize,
    pub executed_safe: usize,
    pub rejected: usize,
    pub warmup: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub execution_unsafe: f64,
    pub execution_safe: f64,
    pub generation: f64,
    pub prediction: f64,
    pub retraining: f64,
}

impl TimeAllocation {
    pub fn total(&self) -> f64 {
        self.execution_unsafe + self.execution_safe + self.generation + self.prediction + self.retraining
    }

    fn fractions(&self) -> TimeAllocation {
        let t = self.total();
        if t == 0.0 {
            return TimeAllocation::default();
        }
        TimeAllocation {
            execution_unsafe: self.execution_unsafe / t,
            execution_safe: self.execution_safe / t,
            generation: self.generation / t,
            prediction: self.prediction / t,
            retraining: self.retraining / t,
        }
    }

    pub fn execution(&self) -> f64 {
        self.execution_unsafe + self.execution_safe
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealTimeResult {
    pub mode: String,
    pub seed: u64,
    pub counts: RealTimeCounts,
    /// Unsafe tests among all executions, warmup included.
    pub unsafe_found: usize,
    pub seconds: TimeAllocation,
    pub fractions: TimeAllocation,
    pub retrain_count: usize,
    /// Predictions against post-mortem verdicts of every predicted test;
    /// warmup tests are not predicted.
    pub confusion: Confusion,
    pub accuracy: f64,
}

/// Lazily generated stream of labeled tests `rt_00000, rt_00001, ...`,
/// built in parallel batches; test `i` depends only on `(seed, i)`.
struct Stream<'a> {
    cfg: &'a RealTimeConfig,
    seed: u64,
    buffer: Vec<TestCase>,
    next: usize,
}

impl Stream<'_> {
    const BATCH: usize = 64;

    fn get(&mut self, i: usize) -> Result<&TestCase, SelectionError> {
        while i >= self.next {
            let start = self.next;
            let batch = (start..start + Self::BATCH)
                .into_par_iter()
                .map(|k| {
                    build_case(
                        format!("rt_{k:05}"),
                        derive_seed(self.seed, k as u64),
                        &self.cfg.driver,
                        &self.cfg.bounds,
                        false,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            self.buffer.extend(batch);
            self.next += Self::BATCH;
        }
        Ok(&self.buffer[i])
    }
}

fn train(spec: &ClassifierSpec, executed: &[&TestCase], seed: u64) -> Result<TrainedClassifier, SelectionError> {
    let owned: Vec<TestCase> = executed.iter().map(|c| (*c).clone()).collect();
    let data = Dataset::from_cases(&owned)?;
    Ok(fit(spec, &oversample_minority(&data, seed)?)?)
}

/// Generate-predict-execute loop on a virtual clock. A test starts only
/// while the clock is below the budget, so the last one may overrun it.
pub fn run_realtime(cfg: &RealTimeConfig, mode: &RealTimeMode, seed: u64) -> Result<RealTimeResult, SelectionError> {
    if !(cfg.budget_s > 0.0) {
        return Err(SelectionError::BudgetTooSmall("budget must be positive".into()));
    }
    cfg.driver.validate()?;
    if let RealTimeMode::Adaptive { warmup, retrain_every, .. } = mode {
        if *warmup < 2 || *retrain_every == 0 {
            return Err(SelectionError::InvalidConfig(
                "adaptive mode needs warmup >= 2 and retrain_every >= 1".into(),
            ));
        }
    }
    let clock = &cfg.clock;
    let mut stream = Stream {
        cfg,
        seed,
        buffer: Vec::new(),
        next: 0,
    };
    let mut time = TimeAllocation::default();
    let mut counts = RealTimeCounts::default();
    let mut confusion = Confusion::default();
    let mut executed: Vec<usize> = Vec::new();
    let mut adaptive_model: Option<TrainedClassifier> = None;
    let mut since_retrain = 0;
    let mut retrain_count = 0;
    let mut unsafe_found = 0;

    while time.total() < cfg.budget_s {
        let i = counts.generated;
        let case = stream.get(i)?.clone();
        counts.generated += 1;
        time.generation += clock.generation_s;
        let outcome = case.outcome.as_ref().expect("generated tests are labeled");
        let features = case.features.expect("generated tests have features");

        let in_warmup = match mode {
            RealTimeMode::Adaptive { warmup, .. } => adaptive_model.is_none() && (counts.warmup < *warmup || {
                let u = executed.iter().filter(|&&k| stream.buffer[k].label() == Some(Label::Unsafe)).count();
                u == 0 || u == executed.len()
            }),
            _ => false,
        };
        let predicted = if in_warmup {
            None
        } else {
            match mode {
                RealTimeMode::Baseline => Some(Label::Unsafe),
                RealTimeMode::PreTrained(model) => {
                    time.prediction += clock.prediction_s;
                    Some(model.predict_case(&case.id, &features)?)
                }
                RealTimeMode::Adaptive { .. } => {
                    time.prediction += clock.prediction_s;
                    Some(adaptive_model.as_ref().expect("trained after warmup").predict(&features)?)
                }
            }
        };
        if let Some(p) = predicted {
            confusion.record(outcome.label, p);
        }
        if predicted == Some(Label::Safe) {
            counts.rejected += 1;
            continue;
        }
        let charged = outcome.duration + clock.overhead_s;
        if outcome.label.is_unsafe() {
            time.execution_unsafe += charged;
            unsafe_found += 1;
        } else {
            time.execution_safe += charged;
        }
        executed.push(i);
        match (predicted, outcome.label) {
            (None, _) => counts.warmup += 1,
            (_, Label::Unsafe) => counts.executed_unsafe += 1,
            (_, Label::Safe) => counts.executed_safe += 1,
        }

        if let RealTimeMode::Adaptive {
            spec,
            warmup,
            retrain_every,
        } = mode
        {
            let warmup_done = adaptive_model.is_none() && counts.warmup >= *warmup && {
                let u = executed.iter().filter(|&&k| stream.buffer[k].label() == Some(Label::Unsafe)).count();
                u > 0 && u < executed.len()
            };
            if predicted.is_some() {
                since_retrain += 1;
            }
            if warmup_done || (predicted.is_some() && since_retrain >= *retrain_every) {
                let cases: Vec<&TestCase> = executed.iter().map(|&k| &stream.buffer[k]).collect();
                adaptive_model = Some(train(spec, &cases, derive_seed(seed, retrain_count as u64))?);
                time.retraining += clock.retraining_s;
                retrain_count += 1;
                since_retrain = 0;
            }
        }
    }
    if let RealTimeMode::Adaptive { .. } = mode {
        if adaptive_model.is_none() {
            return Err(SelectionError::BudgetTooSmall(format!(
                "warmup incomplete after {} tests",
                counts.generated
            )));
        }
    }
    let accuracy = crate::ml::EvalReport::from_confusion(confusion).accuracy;
    Ok(RealTimeResult {
        mode: mode.name().to_string(),
        seed,
        counts,
        unsafe_found,
        fractions: time.fractions(),
        seconds: time,
        retrain_count,
        confusion,
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::Family;

    fn small() -> RealTimeConfig {
        RealTimeConfig {
            budget_s: 600.0,
            ..RealTimeConfig::default()
        }
    }

    #[test]
    fn baseline_conservation_and_fractions() {
        let r = run_realtime(&small(), &RealTimeMode::Baseline, 3).unwrap();
        let c = r.counts;
        assert_eq!(c.generated, c.executed_unsafe + c.executed_safe + c.rejected + c.warmup);
        assert_eq!(c.rejected, 0);
        let f = r.fractions;
        assert!((f.total() - 1.0).abs() < 1e-9);
        assert!(f.execution() >= 0.9);
        assert_eq!(r.confusion.total(), c.generated);
    }

    #[test]
    fn adaptive_warms_up_then_predicts() {
        let spec = ClassifierSpec::new(Family::Logistic);
        let mode = RealTimeMode::Adaptive {
            spec: &spec,
            warmup: 10,
            retrain_every: 1,
        };
        let r = run_realtime(&RealTimeConfig { budget_s: 900.0, ..small() }, &mode, 5).unwrap();
        let c = r.counts;
        assert!(c.warmup >= 10);
        assert_eq!(c.generated, c.executed_unsafe + c.executed_safe + c.rejected + c.warmup);
        assert_eq!(r.confusion.total(), c.generated - c.warmup);
        assert_eq!(r.retrain_count, 1 + c.executed_unsafe + c.executed_safe);
        assert!((r.fractions.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_budget_fails_warmup() {
        let spec = ClassifierSpec::new(Family::Logistic);
        let mode = RealTimeMode::Adaptive {
            spec: &spec,
            warmup: 60,
            retrain_every: 1,
        };
        let cfg = RealTimeConfig { budget_s: 100.0, ..small() };
        assert!(matches!(run_realtime(&cfg, &mode, 1), Err(SelectionError::BudgetTooSmall(_))));
    }

    #[test]
    fn runs_are_reproducible() {
        assert_eq!(
            run_realtime(&small(), &RealTimeMode::Baseline, 8).unwrap(),
            run_realtime(&small(), &RealTimeMode::Baseline, 8).unwrap()
        );
    }
}
