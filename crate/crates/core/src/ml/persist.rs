use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassifierSpec, Family, Hyperparameters, MlError, Parameters, Standardization, TrainedClassifier};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    family: Family,
    hyperparameters: Hyperparameters,
    feature_names: Vec<String>,
    standardization: Standardization,
    parameters: Parameters,
}

pub fn model_to_json(model: &TrainedClassifier) -> String {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        family: model.spec.family,
        hyperparameters: model.spec.hyperparameters.clone(),
        feature_names: model.feature_names.clone(),
        standardization: model.standardization.clone(),
        parameters: model.parameters.clone(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<TrainedClassifier, MlError> {
    let corrupt = |e: serde_json::Error| MlError::CorruptModelFile(e.to_string());
    let value: serde_json::Value = serde_json::from_str(text).map_err(corrupt)?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(MlError::CorruptModelFile(format!(
                "format_version {v} is not supported (expected {MODEL_FORMAT_VERSION})"
            )))
        }
        None => return Err(MlError::CorruptModelFile("missing format_version".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(corrupt)?;
    let d = file.feature_names.len();
    let dims_ok = file.standardization.mean.len() == d
        && file.standardization.std.len() == d
        && match &file.parameters {
            Parameters::Linear { weights, .. } => weights.len() == d,
            Parameters::NaiveBayes { means, variances, .. } => {
                means.iter().chain(variances).all(|v| v.len() == d)
            }
            _ => true,
        };
    if !dims_ok {
        return Err(MlError::CorruptModelFile("parameter dimensions do not match feature_names".into()));
    }
    Ok(TrainedClassifier {
        spec: ClassifierSpec {
            family: file.family,
            hyperparameters: file.hyperparameters,
        },
        feature_names: file.feature_names,
        standardization: file.standardization,
        parameters: file.parameters,
    })
}

pub fn save_model(model: &TrainedClassifier, path: &Path) -> Result<(), MlError> {
    fs::write(path, model_to_json(model) + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedClassifier, MlError> {
    model_from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{fit, Dataset};
    use crate::Label;

    fn model() -> TrainedClassifier {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let labels = (0..20).map(|i| if i > 11 { Label::Unsafe } else { Label::Safe }).collect();
        fit(&ClassifierSpec::new(Family::Logistic), &Dataset::from_rows(rows, labels).unwrap()).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model();
        assert_eq!(model_from_json(&model_to_json(&m)).unwrap(), m);
    }

    #[test]
    fn truncated_text_is_corrupt() {
        let text = model_to_json(&model());
        let err = model_from_json(&text[..text.len() / 2]).unwrap_err();
        assert!(matches!(err, MlError::CorruptModelFile(_)));
    }

    #[test]
    fn wrong_version_is_reported() {
        let text = model_to_json(&model()).replace("\"format_version\": 1", "\"format_version\": 7");
        match model_from_json(&text) {
            Err(MlError::CorruptModelFile(msg)) => assert!(msg.contains("7")),
            other => panic!("{other:?}"),
        }
    }
}
