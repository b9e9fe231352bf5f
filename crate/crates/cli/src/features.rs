use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use roadsift::features::{extract_features, FeatureTable, FeatureVector};
use roadsift::geometry::{GeometryConfig, RoadFile};
use roadsift::ml::{rank_features, Dataset, RankedFeature};
use roadsift::oracle::read_dataset;

use crate::config::{expand_inputs, num, out_dir, require, write_json, write_text};
use crate::error::CliError;
use crate::layered;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractArgs {
    /// Road JSON files, or directories of them.
    #[arg(long, num_args = 1..)]
    pub roads: Vec<PathBuf>,
    /// Labeled simulation file; features are recomputed and labels kept.
    #[arg(long)]
    pub simulation: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(ExtractArgs { roads, simulation, out });

/// Reads road files (or directories of `*.json` road files) as `(id, road)`.
pub fn read_roads(paths: &[PathBuf]) -> Result<Vec<(String, roadsift::geometry::RoadPoints)>, CliError> {
    expand_inputs(paths, ".json")?
        .iter()
        .map(|p| {
            let file = RoadFile::read(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            let road = file.road().map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Ok((file.id, road))
        })
        .collect()
}

pub fn extract(args: ExtractArgs) -> Result<(), CliError> {
    let out = require(args.out, "out")?;
    let config = GeometryConfig::default();
    let mut rows: Vec<(String, FeatureVector, Option<&'static str>)> = Vec::new();
    match (&args.simulation, args.roads.is_empty()) {
        (Some(_), false) => return Err(CliError::usage("give either --roads or --simulation, not both")),
        (None, true) => return Err(CliError::usage("missing --roads or --simulation")),
        (Some(sim), true) => {
            let cases = read_dataset(sim).map_err(|e| CliError::usage(format!("{}: {e}", sim.display())))?;
            for c in cases {
                let fv = extract_features(&c.road, &config).map_err(|e| CliError::usage(format!("{}: {e}", c.id)))?;
                rows.push((c.id.clone(), fv, c.label().map(|l| l.as_str())));
            }
        }
        (None, false) => {
            for (id, road) in read_roads(&args.roads)? {
                let fv = extract_features(&road, &config).map_err(|e| CliError::usage(format!("{id}: {e}")))?;
                rows.push((id, fv, None));
            }
        }
    }
    let table = FeatureTable::from_vectors(rows.iter().map(|(id, fv, l)| (id.as_str(), fv, *l)));
    table.write_file(&out)?;
    println!("{} feature rows written to {}", rows.len(), out.display());
    Ok(())
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankArgs {
    /// Labeled feature CSV.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(RankArgs { features, out });

pub fn load_labeled(path: &Path) -> Result<Dataset, CliError> {
    let table = FeatureTable::read_file(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Dataset::from_table(&table).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn rank(args: RankArgs) -> Result<(), CliError> {
    let data = load_labeled(&require(args.features, "features")?)?;
    let ranking = rank_features(&data)?;
    let dir = out_dir(args.out, "rank-features", None)?;
    write_json(&dir.join("ranking.json"), &ranking)?;

    let mut csv = String::from("method,rank,feature,score,selected\n");
    let lists: [(&str, &[RankedFeature], &[String]); 2] = [
        ("information_gain", &ranking.information_gain, &ranking.selected_by_information_gain),
        ("correlation", &ranking.correlation, &ranking.selected_by_correlation),
    ];
    for (method, list, selected) in lists {
        for (i, f) in list.iter().enumerate() {
            let chosen = selected.contains(&f.name);
            writeln!(csv, "{method},{},{},{},{chosen}", i + 1, f.name, num(f.score)).expect("string write");
        }
    }
    write_text(&dir.join("ranking.csv"), &csv)?;
    let top = |l: &[RankedFeature]| l.first().map_or("-".to_string(), |f| f.name.clone());
    println!(
        "top by information gain: {}; top by correlation: {}; written to {}",
        top(&ranking.information_gain),
        top(&ranking.correlation),
        dir.display()
    );
    Ok(())
}
