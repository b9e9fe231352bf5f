use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_roadsift"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> (i32, String) {
    let out = run(args);
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One small generated dataset shared by the read-only tests.
fn generated() -> &'static Path {
    static DIR: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    &DIR.get_or_init(|| {
        let tmp = TempDir::new().unwrap();
        let out = tmp.path().join("gen");
        ok(&["generate", "-n", "120", "--rf", "1.5", "--seed", "11", "--out", s(&out)]);
        (tmp, out)
    })
    .1
}

#[test]
fn generate_writes_roads_simulation_and_features() {
    let g = generated();
    assert_eq!(fs::read_dir(g.join("roads")).unwrap().count(), 120);
    let csv = fs::read_to_string(g.join("features.csv")).unwrap();
    assert_eq!(csv.lines().count(), 121);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(g.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["tests"], 120);
    let u = summary["unsafe_tests"].as_u64().unwrap();
    assert!(u > 0 && u < 120, "{u} unsafe");
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = TempDir::new().unwrap();
    let (c, err) = code(&["generate", "-n", "0", "--seed", "1", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(c, 2, "{err}");
    let (c, err) = code(&["generate", "-n", "5", "--out", s(&tmp.path().join("y"))]);
    assert_eq!(c, 2);
    assert!(err.contains("--seed"), "{err}");
    assert_eq!(code(&["no-such-command"]).0, 2);
    assert_eq!(code(&["generate", "-n", "lots"]).0, 2);
}

#[test]
fn unlabeled_features_cannot_be_benchmarked() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("f.csv");
    ok(&["extract-features", "--roads", s(&generated().join("roads")), "--out", s(&csv)]);
    let (c, err) = code(&["benchmark", "--features", s(&csv), "--seed", "1", "--out", s(&tmp.path().join("b"))]);
    assert_eq!(c, 2, "{err}");
}

#[test]
fn extracted_features_match_generated_ones() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("f.csv");
    ok(&["extract-features", "--simulation", s(&generated().join("simulation.json")), "--out", s(&csv)]);
    assert_eq!(
        fs::read_to_string(csv).unwrap(),
        fs::read_to_string(generated().join("features.csv")).unwrap()
    );
}

#[test]
fn config_file_values_sit_under_flags() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("c.json");
    let out = tmp.path().join("g");
    fs::write(&cfg, format!(r#"{{"n": 4, "seed": 9, "out": {:?}}}"#, s(&out))).unwrap();
    ok(&["--config", s(&cfg), "generate", "-n", "3", "--no-trace"]);
    assert_eq!(fs::read_dir(out.join("roads")).unwrap().count(), 3);

    fs::write(&cfg, r#"{"n": 4, "sede": 9}"#).unwrap();
    assert_eq!(code(&["--config", s(&cfg), "generate"]).0, 2);
    assert_eq!(code(&["--config", s(&tmp.path().join("missing.json")), "generate"]).0, 2);
}

#[test]
fn rank_features_lists_every_feature_twice() {
    let tmp = TempDir::new().unwrap();
    ok(&["rank-features", "--features", s(&generated().join("features.csv")), "--out", s(tmp.path())]);
    let csv = fs::read_to_string(tmp.path().join("ranking.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 18);
}

#[test]
fn j48_grid_has_100_cells() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "grid-search",
        "--features",
        s(&generated().join("features.csv")),
        "--family",
        "j48",
        "-k",
        "3",
        "--seed",
        "2",
        "--out",
        s(tmp.path()),
    ]);
    let csv = fs::read_to_string(tmp.path().join("grid_decision_tree.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(tmp.path().join("best_model.json").exists());
}

#[test]
fn predict_from_roads_and_features_agree() {
    let tmp = TempDir::new().unwrap();
    let bench = tmp.path().join("b");
    ok(&[
        "benchmark",
        "--features",
        s(&generated().join("features.csv")),
        "--models",
        "logistic,naive_bayes",
        "-k",
        "3",
        "--seed",
        "4",
        "--out",
        s(&bench),
    ]);
    let model = bench.join("best_model.json");
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    ok(&["predict", "--model", s(&model), "--features", s(&generated().join("features.csv")), "--out", s(&a)]);
    ok(&["predict", "--model", s(&model), "--roads", s(&generated().join("roads")), "--out", s(&b)]);
    let from_features = fs::read_to_string(&a).unwrap();
    assert_eq!(from_features.lines().count(), 121);
    assert_eq!(from_features, fs::read_to_string(b).unwrap());

    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "test_id,length,label\nt1,10.0,\n").unwrap();
    let (c, err) = code(&["predict", "--model", s(&model), "--features", s(&bad), "--out", s(&a)]);
    assert_eq!(c, 2, "{err}");
}

#[test]
fn malformed_dbc_reports_its_line() {
    let tmp = TempDir::new().unwrap();
    let dbc = tmp.path().join("bad.dbc");
    fs::write(&dbc, "BO_ 256 SPEED: 8 ECU\n SG_ speed : 0|16@1+ (0.01,0) [0|655.35] \"km/h\" X\n SG_ oops\n").unwrap();
    let (c, err) = code(&[
        "can-convert",
        "--simulation",
        s(&generated().join("simulation.json")),
        "--dbc",
        s(&dbc),
        "--out",
        s(&tmp.path().join("c")),
    ]);
    assert_eq!(c, 2, "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn can_convert_then_play_to_file() {
    let tmp = TempDir::new().unwrap();
    let conv = tmp.path().join("conv");
    let sim = generated().join("simulation.json");
    ok(&["can-convert", "--simulation", s(&sim), "--test", "test_00000", "--test", "test_00001", "--out", s(&conv)]);
    let csvs: Vec<_> = fs::read_dir(&conv)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".canplayback.csv"))
        .collect();
    assert_eq!(csvs.len(), 2);

    let sink = tmp.path().join("bus.bin");
    let report = tmp.path().join("report.json");
    let out = ok(&[
        "can-play",
        "--input",
        s(&conv),
        "--target",
        &format!("file://{}", s(&sink)),
        "--report",
        s(&report),
    ]);
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let frames = printed["frames_sent"].as_u64().unwrap();
    let rows: usize = csvs
        .iter()
        .map(|e| fs::read_to_string(e.path()).unwrap().lines().count() - 1)
        .sum();
    assert_eq!(frames as usize, rows);
    assert_eq!(fs::metadata(&sink).unwrap().len(), printed["bytes_sent"].as_u64().unwrap());
    assert_eq!(printed["conversion_time_stats"]["tests"], 2);

    let (c, _) = code(&["can-play", "--input", s(&conv), "--target", "ftp://nowhere"]);
    assert_eq!(c, 2);
    let (c, _) = code(&["can-convert", "--simulation", s(&sim), "--test", "nope", "--out", s(&conv)]);
    assert_eq!(c, 2);
}

#[test]
fn unreachable_tcp_sink_is_a_runtime_error() {
    let tmp = TempDir::new().unwrap();
    let conv = tmp.path().join("conv");
    ok(&[
        "can-convert",
        "--simulation",
        s(&generated().join("simulation.json")),
        "--test",
        "test_00002",
        "--out",
        s(&conv),
    ]);
    // Bind then drop to get a port nobody listens on.
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let (c, err) = code(&["can-play", "--input", s(&conv), "--target", &format!("tcp://127.0.0.1:{port}")]);
    assert_eq!(c, 3, "{err}");
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn reach_target_beyond_pool_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "reach.json",
        &format!(
            r#"{{"protocol": "reach", "dataset": {:?}, "compositions": [{{"safe": 10, "unsafe": 5}}],
                "strategies": ["random"], "target": 6}}"#,
            s(&generated().join("simulation.json"))
        ),
    );
    let (c, err) = code(&["--config", s(&cfg), "experiment", "--seed", "1", "--out", s(&tmp.path().join("e"))]);
    assert_eq!(c, 2, "{err}");
    let (c, err) = code(&["--config", s(&cfg), "experiment", "--out", s(&tmp.path().join("e"))]);
    assert_eq!(c, 2);
    assert!(err.contains("seed"), "{err}");
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline(root: &Path) {
    let gen = root.join("gen");
    ok(&["generate", "-n", "80", "--rf", "1.5", "--seed", "21", "--out", s(&gen)]);
    ok(&[
        "benchmark",
        "--features",
        s(&gen.join("features.csv")),
        "--models",
        "logistic,j48,random_forest",
        "-k",
        "4",
        "--seed",
        "5",
        "--out",
        s(&root.join("bench")),
    ]);
    let cfg = write_config(
        root,
        "fix.json",
        &format!(
            r#"{{"protocol": "fix", "dataset": {:?}, "model": {:?}, "seeds": [1, 2, 3],
                "compositions": [{{"safe": 20, "unsafe": 10}}], "suite_size": 10}}"#,
            s(&gen.join("simulation.json")),
            s(&root.join("bench/best_model.json"))
        ),
    );
    ok(&["--config", s(&cfg), "experiment", "--out", s(&root.join("exp"))]);
    ok(&[
        "can-convert",
        "--simulation",
        s(&gen.join("simulation.json")),
        "--test",
        "test_00003",
        "--out",
        s(&root.join("can")),
    ]);
}

#[test]
fn pipeline_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for sub in ["gen", "bench", "exp", "can"] {
        let ta = tree(&a.path().join(sub));
        let tb = tree(&b.path().join(sub));
        assert!(!ta.is_empty());
        assert_eq!(ta.len(), tb.len(), "{sub}");
        for ((pa, da), (pb, db)) in ta.iter().zip(&tb) {
            assert_eq!(pa, pb);
            assert!(da == db, "{sub}/{} differs between runs", pa.display());
        }
    }
    let agg = fs::read_to_string(a.path().join("exp/aggregate.csv")).unwrap();
    assert!(agg.lines().any(|l| l.starts_with("fix,20-10,ml,unsafe_ratio,")), "{agg}");
    assert!(a.path().join("exp/comparison.csv").exists());
}
