use std::path::PathBuf;

use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};

use roadsift::canbus::{
    convert_trace, open_sink, parse_dbc, playback_tests, read_playback_csv, write_playback_csv, CanDatabase, Pacing,
    PlaybackRecord, RangePolicy, SignalMapping, DEFAULT_SAMPLE_PERIOD_MS,
};
use roadsift::oracle::read_dataset;

use crate::config::{expand_inputs, out_dir, read_json, require, write_json};
use crate::error::CliError;
use crate::layered;

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertArgs {
    /// Simulation file with recorded traces.
    #[arg(long)]
    pub simulation: Option<PathBuf>,
    /// DBC file (default: the built-in vehicle database).
    #[arg(long)]
    pub dbc: Option<PathBuf>,
    /// JSON signal mapping (default: speed, steering, throttle, brake).
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Resampling period in milliseconds (default 20).
    #[arg(long)]
    pub period_ms: Option<u32>,
    /// Reject out-of-range values instead of clamping them.
    #[arg(long)]
    pub strict: bool,
    /// Convert only these test ids (repeatable).
    #[arg(long = "test")]
    pub tests: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(ConvertArgs { simulation, dbc, mapping, period_ms, strict, tests, out });

#[derive(Serialize)]
struct ConvertedTest {
    test_id: String,
    file: String,
    frames: usize,
    duration_ms: u32,
}

#[derive(Serialize)]
struct Conversion {
    period_ms: u32,
    strict: bool,
    mapping: SignalMapping,
    tests: Vec<ConvertedTest>,
}

pub fn convert(args: ConvertArgs) -> Result<(), CliError> {
    let sim = require(args.simulation, "simulation")?;
    let db = match &args.dbc {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            parse_dbc(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
        }
        None => CanDatabase::default(),
    };
    let mapping: SignalMapping = match &args.mapping {
        Some(p) => read_json(p, "signal mapping")?,
        None => SignalMapping::default(),
    };
    mapping.validate(&db)?;
    let period_ms = args.period_ms.unwrap_or(DEFAULT_SAMPLE_PERIOD_MS);
    let policy = if args.strict { RangePolicy::Strict } else { RangePolicy::Clamp };

    let mut cases = read_dataset(&sim).map_err(|e| CliError::usage(format!("{}: {e}", sim.display())))?;
    if !args.tests.is_empty() {
        if let Some(missing) = args.tests.iter().find(|t| !cases.iter().any(|c| &c.id == *t)) {
            return Err(CliError::usage(format!("no test {missing:?} in {}", sim.display())));
        }
        cases.retain(|c| args.tests.contains(&c.id));
    }
    let dir = out_dir(args.out, "can-convert", None)?;

    let mut tests = Vec::with_capacity(cases.len());
    for c in &cases {
        let records = convert_trace(c, &db, &mapping, period_ms, policy)
            .map_err(|e| CliError::usage(format!("test {}: {e}", c.id)))?;
        let file = format!("{}.canplayback.csv", c.id);
        write_playback_csv(&records, dir.join(&file))?;
        info!("{}: {} frames", c.id, records.len());
        tests.push(ConvertedTest {
            test_id: c.id.clone(),
            file,
            frames: records.len(),
            duration_ms: records.last().map_or(0, |r| r.timestamp_ms),
        });
    }
    let frames: usize = tests.iter().map(|t| t.frames).sum();
    let count = tests.len();
    write_json(
        &dir.join("conversion.json"),
        &Conversion {
            period_ms,
            strict: args.strict,
            mapping,
            tests,
        },
    )?;
    println!("{count} tests, {frames} frames written to {}", dir.display());
    Ok(())
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlayArgs {
    /// Playback CSV files, or directories of them.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Sink: file://<path> or tcp://<host>:<port>.
    #[arg(long)]
    pub target: Option<String>,
    /// fast (default) or realtime.
    #[arg(long)]
    pub pacing: Option<Pacing>,
    /// Also write the transmission report to this JSON file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

layered!(PlayArgs { input, target, pacing, report });

pub fn play(args: PlayArgs) -> Result<(), CliError> {
    if args.input.is_empty() {
        return Err(CliError::usage("missing --input"));
    }
    let target = require(args.target, "target")?;
    let files = expand_inputs(&args.input, ".canplayback.csv")?;
    let tests: Vec<Vec<PlaybackRecord>> = files
        .iter()
        .map(|p| read_playback_csv(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display()))))
        .collect::<Result<_, _>>()?;
    let mut sink = open_sink(&target)?;
    let report = playback_tests(tests.iter().map(Vec::as_slice), &mut *sink, args.pacing.unwrap_or_default())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }
    Ok(())
}
