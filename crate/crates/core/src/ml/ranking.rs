use serde::{Deserialize, Serialize};

use super::{Dataset, MlError};
use crate::Label;

pub const INFORMATION_GAIN_THRESHOLD: f64 = 0.01;
pub const CORRELATION_THRESHOLD: f64 = 0.1;
const BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub information_gain: Vec<RankedFeature>,
    pub correlation: Vec<RankedFeature>,
    /// Names scoring at least [`INFORMATION_GAIN_THRESHOLD`].
    pub selected_by_information_gain: Vec<String>,
    /// Names scoring at least [`CORRELATION_THRESHOLD`].
    pub selected_by_correlation: Vec<String>,
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum()
}

/// Equal-frequency bin index of every value: the cut points are the sorted
/// values at ranks `k n / 10`, and a value's bin is the number of cuts not
/// above it.
pub fn equal_frequency_bins(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts: Vec<f64> = (1..BINS).map(|k| sorted[k * n / BINS]).collect();
    values.iter().map(|v| cuts.iter().filter(|&&c| c <= *v).count()).collect()
}

/// `H(label) - H(label | bin)` in bits.
pub fn information_gain(values: &[f64], labels: &[Label]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let bins = equal_frequency_bins(values);
    let mut table = [[0usize; 2]; BINS];
    for (&b, l) in bins.iter().zip(labels) {
        table[b][l.is_unsafe() as usize] += 1;
    }
    let total = [
        table.iter().map(|r| r[0]).sum::<usize>(),
        table.iter().map(|r| r[1]).sum::<usize>(),
    ];
    let n = values.len() as f64;
    let conditional: f64 = table
        .iter()
        .map(|r| (r[0] + r[1]) as f64 / n * entropy(r))
        .sum();
    (entropy(&total) - conditional).max(0.0)
}

/// |Pearson correlation| against labels coded unsafe = 1; 0 when either
/// side is constant.
pub fn pearson_abs(values: &[f64], labels: &[Label]) -> f64 {
    let n = values.len() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let y: Vec<f64> = labels.iter().map(|l| l.is_unsafe() as u8 as f64).collect();
    let mx = values.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in values.iter().zip(&y) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx <= 1e-300 || syy <= 1e-300 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).abs().min(1.0)
}

fn ranked(names: &[String], scores: Vec<f64>) -> Vec<RankedFeature> {
    let mut out: Vec<RankedFeature> = names
        .iter()
        .zip(scores)
        .map(|(name, score)| RankedFeature {
            name: name.clone(),
            score,
        })
        .collect();
    // stable sort keeps column order among equal scores
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

pub fn rank_features(data: &Dataset) -> Result<FeatureRanking, MlError> {
    let [safe, unsafe_] = data.class_counts();
    if safe == 0 || unsafe_ == 0 {
        return Err(MlError::SingleClassDataset);
    }
    let columns: Vec<Vec<f64>> = (0..data.feature_names.len()).map(|j| data.column(j)).collect();
    let information_gain = ranked(
        &data.feature_names,
        columns.iter().map(|c| information_gain(c, &data.labels)).collect(),
    );
    let correlation = ranked(
        &data.feature_names,
        columns.iter().map(|c| pearson_abs(c, &data.labels)).collect(),
    );
    let pick = |list: &[RankedFeature], t: f64| {
        list.iter()
            .filter(|r| r.score >= t)
            .map(|r| r.name.clone())
            .collect::<Vec<_>>()
    };
    Ok(FeatureRanking {
        selected_by_information_gain: pick(&information_gain, INFORMATION_GAIN_THRESHOLD),
        selected_by_correlation: pick(&correlation, CORRELATION_THRESHOLD),
        information_gain,
        correlation,
    })
}
