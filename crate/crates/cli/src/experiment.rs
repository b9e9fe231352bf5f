use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use serde::{Deserialize, Serialize};

use roadsift::ml::{fit, load_model, oversample_minority, ClassifierSpec, Dataset, Family, TrainedClassifier};
use roadsift::oracle::{read_dataset, DriverConfig, GeneratorBounds, TestCase};
use roadsift::selection::{
    build_pool, cost_effectiveness, repeat, run_fix, run_reach, run_realtime, sign_test_p, Composition, CostModel,
    MeanStd, RealTimeConfig, RealTimeMode, Strategy, VirtualClock,
};
use roadsift::Label;

use crate::config::{num, out_dir, read_json, write_json, write_text};
use crate::error::CliError;

#[derive(Args, Debug, Default)]
pub struct ExperimentArgs {
    /// Base seed; replaces the seeds of the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// With --seed: run seeds seed, seed+1, ... (default 1).
    #[arg(long)]
    pub repetitions: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Fix,
    Reach,
    Realtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Random,
    RoadLength,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Baseline,
    PreTrained,
    Adaptive,
}

/// Trains the ML selector on the first `safe` safe and `unsafe` unsafe
/// tests of the dataset (in file order); those tests never enter a pool.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "logistic")]
    pub spec: ClassifierSpec,
    pub safe: usize,
    #[serde(rename = "unsafe")]
    pub unsafe_: usize,
    #[serde(default)]
    pub seed: u64,
}

fn logistic() -> ClassifierSpec {
    ClassifierSpec::new(Family::Logistic)
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RealTimeSection {
    pub budget_s: f64,
    pub clock: VirtualClock,
    pub driver: DriverConfig,
    pub bounds: GeneratorBounds,
    pub modes: Vec<ModeName>,
    pub warmup: usize,
    pub retrain_every: usize,
    pub adaptive: ClassifierSpec,
}

impl Default for RealTimeSection {
    fn default() -> Self {
        let base = RealTimeConfig::default();
        RealTimeSection {
            budget_s: base.budget_s,
            clock: base.clock,
            driver: base.driver,
            bounds: base.bounds,
            modes: vec![ModeName::Baseline, ModeName::PreTrained, ModeName::Adaptive],
            warmup: 60,
            retrain_every: 1,
            adaptive: logistic(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Labeled simulation file that pools (and training sets) come from.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    /// Pre-trained model for the ML selector.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub compositions: Vec<Composition>,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<StrategyName>,
    /// FIX suite size.
    #[serde(default)]
    pub suite_size: Option<usize>,
    /// REACH number of unsafe tests to find.
    #[serde(default)]
    pub target: Option<usize>,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub realtime: RealTimeSection,
}

fn all_strategies() -> Vec<StrategyName> {
    vec![StrategyName::Random, StrategyName::RoadLength, StrategyName::Ml]
}

/// Metric name and value of one repetition, in output order.
type Metrics = Vec<(&'static str, f64)>;

struct Group {
    key: String,
    composition: String,
    strategy: &'static str,
    runs: Vec<(u64, Metrics)>,
}

fn load_cases(cfg: &ExperimentConfig) -> Result<Vec<TestCase>, CliError> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::usage("the experiment needs a dataset"))?;
    read_dataset(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

/// The ML selector's model and the ids reserved for its training.
fn predictor(
    cfg: &ExperimentConfig,
    cases: Option<&[TestCase]>,
) -> Result<(Option<TrainedClassifier>, HashSet<String>), CliError> {
    match (&cfg.model, &cfg.train) {
        (Some(_), Some(_)) => Err(CliError::usage("give either model or train, not both")),
        (Some(p), None) => {
            let m = load_model(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
            Ok((Some(m), HashSet::new()))
        }
        (None, Some(t)) => {
            let cases = cases.ok_or_else(|| CliError::usage("train needs a dataset"))?;
            let (mut safe, mut unsafe_) = (0, 0);
            let mut picked = Vec::new();
            for c in cases {
                match c.label() {
                    Some(Label::Safe) if safe < t.safe => safe += 1,
                    Some(Label::Unsafe) if unsafe_ < t.unsafe_ => unsafe_ += 1,
                    _ => continue,
                }
                picked.push(c.clone());
            }
            if safe < t.safe || unsafe_ < t.unsafe_ {
                return Err(CliError::usage(format!(
                    "dataset has {safe} safe and {unsafe_} unsafe tests, training needs {} and {}",
                    t.safe, t.unsafe_
                )));
            }
            let data = Dataset::from_cases(&picked)?;
            let model = fit(&t.spec, &oversample_minority(&data, t.seed)?)?;
            Ok((Some(model), picked.into_iter().map(|c| c.id).collect()))
        }
        (None, None) => Ok((None, HashSet::new())),
    }
}

fn seeds(args: &ExperimentArgs, cfg: &ExperimentConfig) -> Result<Vec<u64>, CliError> {
    match args.seed {
        Some(s) => Ok((0..args.repetitions.unwrap_or(1)).map(|i| s + i).collect()),
        None if args.repetitions.is_some() => Err(CliError::usage("--repetitions needs --seed")),
        None if cfg.seeds.is_empty() => Err(CliError::usage("missing --seed (or seeds in the config)")),
        None => Ok(cfg.seeds.clone()),
    }
}

pub fn run(args: ExperimentArgs, config: Option<&Path>) -> Result<(), CliError> {
    let path = config.ok_or_else(|| CliError::usage("experiment needs --config <file>"))?;
    let cfg: ExperimentConfig = read_json(path, "experiment config")?;
    let seeds = seeds(&args, &cfg)?;
    let dir = out_dir(args.out.or(cfg.out.clone()), "experiment", seeds.first().copied())?;
    let results = dir.join("results");
    std::fs::create_dir_all(&results)?;

    let groups = match cfg.protocol {
        Protocol::Fix | Protocol::Reach => pool_protocol(&cfg, &seeds, &results)?,
        Protocol::Realtime => realtime(&cfg, &seeds, &results)?,
    };
    write_text(&dir.join("aggregate.csv"), &aggregate(&groups))?;
    if let Some(c) = comparison(&cfg, &groups) {
        write_text(&dir.join("comparison.csv"), &c)?;
    }
    println!("{} runs written to {}", groups.iter().map(|g| g.runs.len()).sum::<usize>(), dir.display());
    Ok(())
}

fn pool_protocol(cfg: &ExperimentConfig, seeds: &[u64], results: &Path) -> Result<Vec<Group>, CliError> {
    if cfg.compositions.is_empty() {
        return Err(CliError::usage("the experiment needs at least one composition"));
    }
    let (protocol, size) = match cfg.protocol {
        Protocol::Fix => ("fix", cfg.suite_size.ok_or_else(|| CliError::usage("fix needs suite_size"))?),
        _ => ("reach", cfg.target.ok_or_else(|| CliError::usage("reach needs target"))?),
    };
    let cases = load_cases(cfg)?;
    let (model, exclude) = predictor(cfg, Some(&cases))?;
    let mut groups = Vec::new();
    for comp in &cfg.compositions {
        let composition = format!("{}-{}", comp.safe, comp.unsafe_);
        for &name in &cfg.strategies {
            let strategy = match name {
                StrategyName::Random => Strategy::Random,
                StrategyName::RoadLength => Strategy::RoadLength,
                StrategyName::Ml => Strategy::Ml(
                    model
                        .as_ref()
                        .ok_or_else(|| CliError::usage("the ml strategy needs a model or train section"))?,
                ),
            };
            info!("{protocol} {composition} {}", strategy.name());
            let runs = repeat(seeds, |seed| {
                let pool = build_pool(&cases, *comp, &exclude, seed)?;
                let (metrics, json) = if cfg.protocol == Protocol::Fix {
                    let r = run_fix(&pool, &strategy, size, seed)?;
                    let m = vec![
                        ("unsafe_ratio", r.unsafe_ratio),
                        ("unsafe_count", r.unsafe_count as f64),
                        ("backfilled", r.backfilled as f64),
                    ];
                    (m, to_value(&r))
                } else {
                    let r = run_reach(&pool, &strategy, size, &cfg.cost, seed)?;
                    let labels: Vec<Label> = (0..r.executed_count)
                        .map(|i| if i < r.unsafe_found { Label::Unsafe } else { Label::Safe })
                        .collect();
                    let m = vec![
                        ("executed_count", r.executed_count as f64),
                        ("elapsed_cost_safe", r.elapsed_cost_safe),
                        ("elapsed_cost_unsafe", r.elapsed_cost_unsafe),
                        ("total_cost", r.total_cost),
                        ("skipped", r.skipped as f64),
                        ("failing_percent", cost_effectiveness(&labels).failing_percent()),
                    ];
                    (m, to_value(&r))
                };
                Ok((seed, metrics, json))
            })?;
            let runs = save(runs, |seed| {
                results.join(format!("{protocol}_{composition}_{}_seed{seed}.json", strategy.name()))
            })?;
            groups.push(Group {
                key: protocol.to_string(),
                composition: composition.clone(),
                strategy: strategy.name(),
                runs,
            });
        }
    }
    Ok(groups)
}

fn realtime(cfg: &ExperimentConfig, seeds: &[u64], results: &Path) -> Result<Vec<Group>, CliError> {
    let rt = &cfg.realtime;
    let base = RealTimeConfig {
        budget_s: rt.budget_s,
        clock: rt.clock,
        driver: rt.driver,
        bounds: rt.bounds,
    };
    let needs_model = rt.modes.contains(&ModeName::PreTrained);
    let cases = if cfg.train.is_some() && needs_model { Some(load_cases(cfg)?) } else { None };
    let (model, _) = if needs_model { predictor(cfg, cases.as_deref())? } else { (None, HashSet::new()) };
    let mut groups = Vec::new();
    for &name in &rt.modes {
        let mode = match name {
            ModeName::Baseline => RealTimeMode::Baseline,
            ModeName::PreTrained => RealTimeMode::PreTrained(
                model
                    .as_ref()
                    .ok_or_else(|| CliError::usage("pre_trained mode needs a model or train section"))?,
            ),
            ModeName::Adaptive => RealTimeMode::Adaptive {
                spec: &rt.adaptive,
                warmup: rt.warmup,
                retrain_every: rt.retrain_every,
            },
        };
        info!("realtime {}", mode.name());
        let runs = repeat(seeds, |seed| {
            let r = run_realtime(&base, &mode, seed)?;
            let f = r.fractions;
            Ok((
                seed,
                vec![
                    ("generated", r.counts.generated as f64),
                    ("executed_unsafe", r.counts.executed_unsafe as f64),
                    ("executed_safe", r.counts.executed_safe as f64),
                    ("rejected", r.counts.rejected as f64),
                    ("warmup", r.counts.warmup as f64),
                    ("unsafe_found", r.unsafe_found as f64),
                    ("accuracy", r.accuracy),
                    ("retrain_count", r.retrain_count as f64),
                    ("fraction_execution_unsafe", f.execution_unsafe),
                    ("fraction_execution_safe", f.execution_safe),
                    ("fraction_generation", f.generation),
                    ("fraction_prediction", f.prediction),
                    ("fraction_retraining", f.retraining),
                ],
                to_value(&r),
            ))
        })?;
        let runs = save(runs, |seed| results.join(format!("realtime_{}_seed{seed}.json", mode.name())))?;
        groups.push(Group {
            key: "realtime".into(),
            composition: String::new(),
            strategy: mode.name(),
            runs,
        });
    }
    Ok(groups)
}

fn to_value<T: Serialize>(r: &T) -> serde_json::Value {
    serde_json::to_value(r).expect("results serialize")
}

/// Writes each repetition's result file, in seed order.
fn save(
    runs: Vec<(u64, Metrics, serde_json::Value)>,
    path: impl Fn(u64) -> PathBuf,
) -> Result<Vec<(u64, Metrics)>, CliError> {
    runs.into_iter()
        .map(|(seed, m, json)| {
            write_json(&path(seed), &json)?;
            Ok((seed, m))
        })
        .collect()
}

fn aggregate(groups: &[Group]) -> String {
    let mut csv = String::from("protocol,composition,strategy,metric,mean,std,n\n");
    for g in groups {
        let Some((_, first)) = g.runs.first() else { continue };
        for (i, (metric, _)) in first.iter().enumerate() {
            let values: Vec<f64> = g.runs.iter().map(|(_, m)| m[i].1).collect();
            let s = MeanStd::of(&values);
            writeln!(
                csv,
                "{},{},{},{metric},{},{},{}",
                g.key,
                g.composition,
                g.strategy,
                num(s.mean),
                num(s.std),
                s.n
            )
            .expect("string write");
        }
    }
    csv
}

/// Paired ML-vs-random wins per composition with a one-sided sign test.
fn comparison(cfg: &ExperimentConfig, groups: &[Group]) -> Option<String> {
    let (metric, higher_is_better) = match cfg.protocol {
        Protocol::Fix => ("unsafe_ratio", true),
        Protocol::Reach => ("executed_count", false),
        Protocol::Realtime => return None,
    };
    let mut by_comp: BTreeMap<&str, (Option<&Group>, Option<&Group>)> = BTreeMap::new();
    for g in groups {
        let e = by_comp.entry(&g.composition).or_default();
        match g.strategy {
            "ml" => e.0 = Some(g),
            "random" => e.1 = Some(g),
            _ => {}
        }
    }
    let mut csv = String::from("composition,metric,ml_mean,random_mean,wins,losses,ties,p_value\n");
    let mut any = false;
    for comp in cfg.compositions.iter().map(|c| format!("{}-{}", c.safe, c.unsafe_)) {
        let Some((Some(ml), Some(rnd))) = by_comp.get(comp.as_str()) else { continue };
        let value = |g: &Group, k: usize| g.runs[k].1.iter().find(|m| m.0 == metric).map_or(0.0, |m| m.1);
        let (mut wins, mut losses, mut ties) = (0, 0, 0);
        for k in 0..ml.runs.len() {
            let (a, b) = (value(ml, k), value(rnd, k));
            let better = if higher_is_better { a > b } else { a < b };
            if a == b {
                ties += 1;
            } else if better {
                wins += 1;
            } else {
                losses += 1;
            }
        }
        let mean = |g: &Group| MeanStd::of(&(0..g.runs.len()).map(|k| value(g, k)).collect::<Vec<_>>()).mean;
        writeln!(
            csv,
            "{comp},{metric},{},{},{wins},{losses},{ties},{}",
            num(mean(ml)),
            num(mean(rnd)),
            num(sign_test_p(wins, losses))
        )
        .expect("string write");
        any = true;
    }
    any.then_some(csv)
}
