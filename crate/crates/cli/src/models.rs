use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};

use roadsift::features::{extract_features, FeatureTable};
use roadsift::geometry::GeometryConfig;
use roadsift::ml::{
    fit, grid_search, kfold_evaluate, load_model, oversample_minority, save_model, ClassifierSpec, Dataset,
    EvalReport, Family, GridOutcome, MlError,
};

use crate::config::{num, out_dir, require, write_json, write_text};
use crate::error::CliError;
use crate::features::{load_labeled, read_roads};
use crate::layered;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Model families to compare, comma separated (default: all six).
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Number of cross-validation folds (default 10).
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run the hyperparameter grid of this family instead.
    #[arg(long)]
    pub grid_search: Option<String>,
}

layered!(BenchmarkArgs { features, models, k, seed, out, grid_search });

#[derive(Serialize)]
struct FamilyReport<'a> {
    spec: &'a ClassifierSpec,
    folds: usize,
    seed: u64,
    report: &'a EvalReport,
}

fn report_row(csv: &mut String, label: &str, r: &EvalReport) {
    writeln!(
        csv,
        "{label},{},{},{},{},{},{},{},{}",
        num(r.accuracy),
        num(r.unsafe_class.precision),
        num(r.unsafe_class.recall),
        num(r.unsafe_class.f1),
        num(r.safe_class.precision),
        num(r.safe_class.recall),
        num(r.safe_class.f1),
        num(r.weighted_avg_f1)
    )
    .expect("string write");
}

/// Oversampled fit on the whole dataset, as used for deployment.
fn fit_final(spec: &ClassifierSpec, data: &Dataset, seed: u64, path: &Path) -> Result<(), CliError> {
    let model = fit(spec, &oversample_minority(data, seed)?)?;
    save_model(&model, path).map_err(CliError::runtime)
}

pub fn benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    if let Some(family) = args.grid_search {
        return grid(GridArgs {
            features: args.features,
            family: Some(family),
            k: args.k,
            seed: args.seed,
            out: args.out,
        });
    }
    let data = load_labeled(&require(args.features, "features")?)?;
    let seed = require(args.seed, "seed")?;
    let k = args.k.unwrap_or(10);
    let families: Vec<Family> = if args.models.is_empty() {
        Family::ALL.to_vec()
    } else {
        args.models.iter().map(|m| m.parse()).collect::<Result<_, MlError>>()?
    };
    let dir = out_dir(args.out, "benchmark", Some(seed))?;
    let reports = dir.join("reports");
    std::fs::create_dir_all(&reports)?;

    let mut csv = String::from(
        "family,accuracy,unsafe_precision,unsafe_recall,unsafe_f1,safe_precision,safe_recall,safe_f1,weighted_avg_f1\n",
    );
    let mut best: Option<(ClassifierSpec, f64)> = None;
    for family in families {
        let spec = ClassifierSpec::new(family);
        info!("{k}-fold evaluation of {family}");
        let report = kfold_evaluate(&data, &spec, k, seed)?;
        write_json(
            &reports.join(format!("{family}.json")),
            &FamilyReport {
                spec: &spec,
                folds: k,
                seed,
                report: &report,
            },
        )?;
        report_row(&mut csv, family.name(), &report);
        if best.as_ref().is_none_or(|(_, f1)| report.weighted_avg_f1 > *f1) {
            best = Some((spec, report.weighted_avg_f1));
        }
    }
    write_text(&dir.join("benchmark.csv"), &csv)?;
    let (spec, f1) = best.ok_or_else(|| CliError::usage("no model families given"))?;
    fit_final(&spec, &data, seed, &dir.join("best_model.json"))?;
    println!("best: {} (weighted F1 {f1:.3}); written to {}", spec.family, dir.display());
    Ok(())
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Model family whose grid is searched.
    #[arg(long)]
    pub family: Option<String>,
    /// Number of cross-validation folds (default 10).
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(GridArgs { features, family, k, seed, out });

pub fn grid(args: GridArgs) -> Result<(), CliError> {
    let data = load_labeled(&require(args.features, "features")?)?;
    let family: Family = require(args.family, "family")?.parse()?;
    let seed = require(args.seed, "seed")?;
    let k = args.k.unwrap_or(10);
    let dir = out_dir(args.out, "grid-search", Some(seed))?;

    info!("grid search over {family}");
    let cells = grid_search(family, &data, k, seed)?;
    let mut csv = String::from("rank,parameters,status,weighted_avg_f1,accuracy,note\n");
    for (i, cell) in cells.iter().enumerate() {
        let params = cell.describe();
        match &cell.outcome {
            GridOutcome::Evaluated { report } => writeln!(
                csv,
                "{},{params},evaluated,{},{},",
                i + 1,
                num(report.weighted_avg_f1),
                num(report.accuracy)
            ),
            GridOutcome::Skipped { reason } => {
                writeln!(csv, "{},{params},skipped,,,{}", i + 1, reason.replace(',', ";"))
            }
        }
        .expect("string write");
    }
    write_text(&dir.join(format!("grid_{family}.csv")), &csv)?;
    write_json(&dir.join(format!("grid_{family}.json")), &cells)?;
    let skipped = cells.iter().filter(|c| c.weighted_avg_f1().is_none()).count();
    if let Some(top) = cells.iter().find(|c| c.weighted_avg_f1().is_some()) {
        fit_final(&top.spec, &data, seed, &dir.join("best_model.json"))?;
        println!(
            "{} cells ({skipped} skipped); best {} with weighted F1 {:.3}; written to {}",
            cells.len(),
            Some(top.describe()).filter(|d| !d.is_empty()).unwrap_or_else(|| "(defaults)".into()),
            top.weighted_avg_f1().unwrap_or_default(),
            dir.display()
        );
    }
    Ok(())
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Feature CSV; the label column may be empty.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Road JSON files, or directories of them.
    #[arg(long, num_args = 1..)]
    pub roads: Vec<PathBuf>,
    /// Output CSV of `test_id,prediction`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(PredictArgs { model, features, roads, out });

pub fn predict(args: PredictArgs) -> Result<(), CliError> {
    let model_path = require(args.model, "model")?;
    let out = require(args.out, "out")?;
    let model = load_model(&model_path).map_err(|e| CliError::usage(format!("{}: {e}", model_path.display())))?;
    let mut rows: Vec<(String, &'static str)> = Vec::new();
    match (&args.features, args.roads.is_empty()) {
        (Some(_), false) => return Err(CliError::usage("give either --features or --roads, not both")),
        (None, true) => return Err(CliError::usage("missing --features or --roads")),
        (Some(path), true) => {
            let table =
                FeatureTable::read_file(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let index: Vec<usize> = model
                .feature_names
                .iter()
                .map(|n| {
                    table.feature_names.iter().position(|m| m == n).ok_or_else(|| {
                        CliError::usage(format!("feature mismatch: {} lacks model feature {n:?}", path.display()))
                    })
                })
                .collect::<Result<_, _>>()?;
            for r in &table.rows {
                let x: Vec<f64> = index.iter().map(|&i| r.values[i]).collect();
                rows.push((r.test_id.clone(), model.predict_row(&x).as_str()));
            }
        }
        (None, false) => {
            let config = GeometryConfig::default();
            for (id, road) in read_roads(&args.roads)? {
                let fv = extract_features(&road, &config).map_err(|e| CliError::usage(format!("{id}: {e}")))?;
                rows.push((id, model.predict(&fv)?.as_str()));
            }
        }
    }
    let mut csv = String::from("test_id,prediction\n");
    for (id, p) in &rows {
        writeln!(csv, "{id},{p}").expect("string write");
    }
    write_text(&out, &csv)?;
    let unsafe_count = rows.iter().filter(|r| r.1 == "unsafe").count();
    println!("{} tests, {unsafe_count} predicted unsafe; written to {}", rows.len(), out.display());
    Ok(())
}
