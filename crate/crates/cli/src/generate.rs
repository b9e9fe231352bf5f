use std::fs;
use std::path::PathBuf;

use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};

use roadsift::features::FeatureTable;
use roadsift::geometry::RoadFile;
use roadsift::oracle::{build_dataset_with, unsafe_fraction, write_dataset, DatasetOptions, DriverConfig, GeneratorBounds};

use crate::config::{out_dir, read_json, require, write_json};
use crate::error::CliError;
use crate::layered;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateArgs {
    /// Number of tests to generate.
    #[arg(short = 'n', long)]
    pub n: Option<usize>,
    /// Driver risk factor; overrides the driver config.
    #[arg(long)]
    pub rf: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with driver parameters.
    #[arg(long)]
    pub driver_config: Option<PathBuf>,
    /// Do not record per-step traces (CAN conversion needs them).
    #[arg(long)]
    pub no_trace: bool,
    /// Driver parameters given inline in the config file.
    #[arg(skip)]
    pub driver: Option<DriverConfig>,
    /// Road generator bounds, config file only.
    #[arg(skip)]
    pub bounds: Option<GeneratorBounds>,
}

layered!(GenerateArgs { n, rf, seed, out, driver_config, no_trace, driver, bounds });

#[derive(Serialize)]
struct Summary {
    tests: usize,
    unsafe_tests: usize,
    unsafe_fraction: f64,
    seed: u64,
    driver: DriverConfig,
    bounds: GeneratorBounds,
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let n = require(args.n, "n")?;
    let seed = require(args.seed, "seed")?;
    if n == 0 {
        return Err(CliError::usage("-n must be at least 1"));
    }
    if args.driver.is_some() && args.driver_config.is_some() {
        return Err(CliError::usage("give either driver_config or an inline driver, not both"));
    }
    let mut driver = match &args.driver_config {
        Some(p) => read_json(p, "driver config")?,
        None => args.driver.unwrap_or_default(),
    };
    if let Some(rf) = args.rf {
        driver.risk_factor = rf;
    }
    driver.validate()?;
    let options = DatasetOptions {
        bounds: args.bounds.unwrap_or_default(),
        record_trace: !args.no_trace,
        first_index: 0,
    };
    let dir = out_dir(args.out, "generate", Some(seed))?;

    info!("generating {n} tests (rf {}, seed {seed})", driver.risk_factor);
    let cases = build_dataset_with(n, &driver, seed, &options)?;

    let roads = dir.join("roads");
    fs::create_dir_all(&roads)?;
    for c in &cases {
        RoadFile::new(&c.id, &c.road)
            .write(roads.join(format!("{}.json", c.id)))
            .map_err(CliError::runtime)?;
    }
    write_dataset(&cases, dir.join("simulation.json"))?;
    let table = FeatureTable::from_vectors(cases.iter().map(|c| {
        (
            c.id.as_str(),
            c.features.as_ref().expect("generated tests have features"),
            c.label().map(|l| l.as_str()),
        )
    }));
    table.write_file(dir.join("features.csv"))?;

    let unsafe_tests = cases.iter().filter(|c| c.label().is_some_and(|l| l.is_unsafe())).count();
    let summary = Summary {
        tests: n,
        unsafe_tests,
        unsafe_fraction: unsafe_fraction(&cases),
        seed,
        driver,
        bounds: options.bounds,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!("{n} tests, {unsafe_tests} unsafe, written to {}", dir.display());
    Ok(())
}
