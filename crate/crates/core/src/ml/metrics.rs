use serde::{Deserialize, Serialize};

use crate::Label;

/// Confusion counts with `Unsafe` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Confusion { tp, fp, tn, fn_ }
    }

    pub fn from_pairs(actual: &[Label], predicted: &[Label]) -> Self {
        let mut c = Confusion::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            c.record(a, p);
        }
        c
    }

    pub fn record(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Unsafe, Label::Unsafe) => self.tp += 1,
            (Label::Safe, Label::Unsafe) => self.fp += 1,
            (Label::Safe, Label::Safe) => self.tn += 1,
            (Label::Unsafe, Label::Safe) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    fn new(true_pos: usize, false_pos: usize, false_neg: usize) -> Self {
        let precision = ratio(true_pos, true_pos + false_pos);
        let recall = ratio(true_pos, true_pos + false_neg);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: true_pos + false_neg,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub accuracy: f64,
    #[serde(rename = "unsafe")]
    pub unsafe_class: ClassMetrics,
    #[serde(rename = "safe")]
    pub safe_class: ClassMetrics,
    pub weighted_avg_f1: f64,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let Confusion { tp, fp, tn, fn_ } = confusion;
        let unsafe_class = ClassMetrics::new(tp, fp, fn_);
        let safe_class = ClassMetrics::new(tn, fn_, fp);
        let total = confusion.total();
        let weighted_avg_f1 = if total == 0 {
            0.0
        } else {
            (unsafe_class.f1 * unsafe_class.support as f64 + safe_class.f1 * safe_class.support as f64)
                / total as f64
        };
        EvalReport {
            confusion,
            accuracy: ratio(tp + tn, total),
            unsafe_class,
            safe_class,
            weighted_avg_f1,
        }
    }

    pub fn from_pairs(actual: &[Label], predicted: &[Label]) -> Self {
        Self::from_confusion(Confusion::from_pairs(actual, predicted))
    }
}
