use serde::{Deserialize, Serialize};

use super::MlError;
use crate::features::{FeatureTable, FEATURE_NAMES};
use crate::oracle::TestCase;
use crate::Label;

/// Labeled feature matrix. Row order is significant for seeded operations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl Dataset {
    pub fn new(
        feature_names: Vec<String>,
        ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<Label>,
    ) -> Result<Self, MlError> {
        if ids.len() != rows.len() || rows.len() != labels.len() {
            return Err(MlError::InvalidDataset(format!(
                "{} ids, {} rows and {} labels",
                ids.len(),
                rows.len(),
                labels.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != feature_names.len()) {
            return Err(MlError::InvalidDataset(format!(
                "row {i} has {} values for {} features",
                r.len(),
                feature_names.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MlError::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Dataset {
            feature_names,
            ids,
            rows,
            labels,
        })
    }

    /// Unnamed rows with generated ids; handy for synthetic data.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self, MlError> {
        let d = rows.first().map_or(0, Vec::len);
        let names = (0..d).map(|i| format!("x{i}")).collect();
        let ids = (0..rows.len()).map(|i| format!("r{i}")).collect();
        Self::new(names, ids, rows, labels)
    }

    /// All labeled cases that carry features.
    pub fn from_cases(cases: &[TestCase]) -> Result<Self, MlError> {
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for case in cases {
            let (Some(features), Some(label)) = (case.features, case.label()) else {
                continue;
            };
            ids.push(case.id.clone());
            rows.push(features.to_array().to_vec());
            labels.push(label);
        }
        Self::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), ids, rows, labels)
    }

    /// Requires every row to be labeled.
    pub fn from_table(table: &FeatureTable) -> Result<Self, MlError> {
        let mut labels = Vec::with_capacity(table.rows.len());
        for row in &table.rows {
            let label = row
                .label
                .as_deref()
                .ok_or_else(|| MlError::InvalidDataset(format!("row {} has no label", row.test_id)))?
                .parse::<Label>()
                .map_err(MlError::InvalidDataset)?;
            labels.push(label);
        }
        Self::new(
            table.feature_names.clone(),
            table.rows.iter().map(|r| r.test_id.clone()).collect(),
            table.rows.iter().map(|r| r.values.clone()).collect(),
            labels,
        )
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `[safe, unsafe]` counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let u = self.labels.iter().filter(|l| l.is_unsafe()).count();
        [self.labels.len() - u, u]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_features(&self, names: &[String]) -> Result<Dataset, MlError> {
        let index: Vec<usize> = names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| MlError::FeatureMismatch(format!("no feature {n:?}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset {
            feature_names: names.to_vec(),
            ids: self.ids.clone(),
            rows: self.rows.iter().map(|r| index.iter().map(|&i| r[i]).collect()).collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Per-feature mean and (population) standard deviation captured at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardization { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}
