use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_ebmine");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn ebmine(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env("EBMINE_THREADS", "2")
        .output()
        .expect("spawn ebmine")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = ebmine(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// sha256 recorded for `file` in a manifest's `inputs` or `outputs`.
fn digest(m: &Value, side: &str, file: &str) -> String {
    m[side]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["path"].as_str().unwrap().ends_with(file))
        .unwrap_or_else(|| panic!("{file} not in {side}"))["sha256"]
        .as_str()
        .unwrap()
        .to_string()
}

fn write_spec(dir: &Path) {
    let spec = r#"{
  "families": [
    {"family": "acct_ew",
     "params": {"theta1": 0.0, "sigma1": 0.1, "theta2": 0.0, "sigma2": 2.0, "lambda": 0.5},
     "n_strategies": 500, "vol": {"kind": "constant", "sd": 0.03}},
    {"family": "pastret_vw",
     "params": {"theta1": 0.0, "sigma1": 0.0, "theta2": 0.5, "sigma2": 1.5, "lambda": 0.7},
     "n_strategies": 500, "vol": {"kind": "uniform", "low": 0.01, "high": 0.05}}
  ],
  "n_months": 300,
  "start": "1990-01",
  "seed": 11
}"#;
    std::fs::write(dir.join("spec.json"), spec).unwrap();
}

#[test]
fn smoke_pipeline_links_by_digest_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_spec(d);
    ok(
        d,
        &[
            "simulate",
            "--spec",
            "spec.json",
            "--out-panel",
            "panel.csv",
            "--out-truth",
            "truth.csv",
        ],
    );
    ok(
        d,
        &[
            "summarize",
            "--panel",
            "panel.csv",
            "--out",
            "stats.csv",
            "--end",
            "2009-12",
            "--window",
            "240",
            "--min-obs",
            "60",
        ],
    );
    ok(
        d,
        &[
            "fit",
            "--stats",
            "stats.csv",
            "--out",
            "model.json",
            "--n-starts",
            "4",
        ],
    );
    ok(
        d,
        &[
            "predict",
            "--stats",
            "stats.csv",
            "--model",
            "model.json",
            "--out",
            "pred.csv",
        ],
    );
    ok(
        d,
        &[
            "fit",
            "--panel",
            "panel.csv",
            "--first-year",
            "2010",
            "--last-year",
            "2013",
            "--window",
            "240",
            "--min-obs",
            "60",
            "--n-starts",
            "4",
            "--out",
            "models.json",
        ],
    );
    ok(
        d,
        &[
            "backtest",
            "--panel",
            "panel.csv",
            "--models",
            "models.json",
            "--first-year",
            "2010",
            "--last-year",
            "2013",
            "--window",
            "240",
            "--min-obs",
            "60",
            "--top-pct",
            "0.01,0.05",
            "--out-dir",
            "bt",
        ],
    );

    let sim = manifest(&d.join("panel.csv.manifest.json"));
    let summ = manifest(&d.join("stats.csv.manifest.json"));
    let fit = manifest(&d.join("model.json.manifest.json"));
    let pred = manifest(&d.join("pred.csv.manifest.json"));
    let fity = manifest(&d.join("models.json.manifest.json"));
    let bt = manifest(&d.join("bt/backtest.manifest.json"));

    assert_eq!(sim["tool"], "ebmine");
    assert_eq!(sim["config"]["command"]["subcommand"], "simulate");
    assert_eq!(
        digest(&sim, "outputs", "panel.csv"),
        digest(&summ, "inputs", "panel.csv")
    );
    assert_eq!(
        digest(&summ, "outputs", "stats.csv"),
        digest(&fit, "inputs", "stats.csv")
    );
    assert_eq!(
        digest(&fit, "outputs", "model.json"),
        digest(&pred, "inputs", "model.json")
    );
    assert_eq!(
        digest(&summ, "outputs", "stats.csv"),
        digest(&pred, "inputs", "stats.csv")
    );
    assert_eq!(
        digest(&sim, "outputs", "panel.csv"),
        digest(&fity, "inputs", "panel.csv")
    );
    assert_eq!(
        digest(&fity, "outputs", "models.json"),
        digest(&bt, "inputs", "models.json")
    );
    assert_eq!(
        digest(&sim, "outputs", "panel.csv"),
        digest(&bt, "inputs", "panel.csv")
    );
    assert_eq!(bt["outputs"].as_array().unwrap().len(), 9);

    let summary: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("bt/summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 4);
    for run in summary.as_array().unwrap() {
        assert_eq!(run["summary"]["n_months"], 48);
    }

    // rerun every step into a fresh directory and compare primary outputs
    let tmp2 = tempfile::tempdir().unwrap();
    let d2 = tmp2.path();
    std::fs::copy(d.join("spec.json"), d2.join("spec.json")).unwrap();
    ok(
        d2,
        &[
            "simulate",
            "--spec",
            "spec.json",
            "--out-panel",
            "panel.csv",
            "--out-truth",
            "truth.csv",
        ],
    );
    ok(
        d2,
        &[
            "summarize",
            "--panel",
            "panel.csv",
            "--out",
            "stats.csv",
            "--end",
            "2009-12",
            "--window",
            "240",
            "--min-obs",
            "60",
        ],
    );
    ok(
        d2,
        &[
            "fit",
            "--stats",
            "stats.csv",
            "--out",
            "model.json",
            "--n-starts",
            "4",
        ],
    );
    ok(
        d2,
        &[
            "predict",
            "--stats",
            "stats.csv",
            "--model",
            "model.json",
            "--out",
            "pred.csv",
        ],
    );
    ok(
        d2,
        &[
            "fit",
            "--panel",
            "panel.csv",
            "--first-year",
            "2010",
            "--last-year",
            "2013",
            "--window",
            "240",
            "--min-obs",
            "60",
            "--n-starts",
            "4",
            "--out",
            "models.json",
        ],
    );
    ok(
        d2,
        &[
            "backtest",
            "--panel",
            "panel.csv",
            "--models",
            "models.json",
            "--first-year",
            "2010",
            "--last-year",
            "2013",
            "--window",
            "240",
            "--min-obs",
            "60",
            "--top-pct",
            "0.01,0.05",
            "--out-dir",
            "bt",
        ],
    );
    for f in [
        "panel.csv",
        "truth.csv",
        "stats.csv",
        "model.json",
        "pred.csv",
        "models.json",
        "bt/summary.json",
        "bt/monthly_eb_0.01.csv",
        "bt/cumret_naive_0.05.csv",
    ] {
        assert_eq!(
            std::fs::read(d.join(f)).unwrap(),
            std::fs::read(d2.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn thread_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::copy(data("rw_panel.csv"), d.join("p.csv")).unwrap();
    for threads in ["1", "3"] {
        let out = Command::new(BIN)
            .args([
                "fdr", "--method", "rw", "--panel", "p.csv", "--n-boot", "500", "--out",
            ])
            .arg(format!("rw{threads}.json"))
            .current_dir(d)
            .env("EBMINE_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(
        std::fs::read(d.join("rw1.json")).unwrap(),
        std::fs::read(d.join("rw3.json")).unwrap()
    );
}

#[test]
fn rw_hurdle_matches_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let panel = data("rw_panel.csv");
    ok(
        d,
        &[
            "fdr",
            "--method",
            "rw",
            "--q",
            "0.05",
            "--p",
            "0.05",
            "--seed",
            "7",
            "--panel",
            panel.to_str().unwrap(),
            "--out",
            "rw.json",
        ],
    );
    let got: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("rw.json")).unwrap()).unwrap();
    let want: Value =
        serde_json::from_str(&std::fs::read_to_string(data("rw_golden.json")).unwrap()).unwrap();
    assert_eq!(got, want);
}

#[test]
fn manifest_lists_exactly_the_declared_inputs() {
    // the working directory holds only declared inputs; anything else read would fail
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::copy(data("rw_panel.csv"), d.join("in.csv")).unwrap();
    ok(
        d,
        &[
            "fdr",
            "--method",
            "by13,storey",
            "--panel",
            "in.csv",
            "--oos-panel",
            "in.csv",
            "--out",
            "h.json",
            "--bins-out",
            "bins.csv",
        ],
    );
    let m = manifest(&d.join("h.json.manifest.json"));
    let inputs: Vec<&str> = m["inputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["path"].as_str().unwrap())
        .collect();
    assert_eq!(inputs, ["in.csv", "in.csv"]);
    let outputs: Vec<&str> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["path"].as_str().unwrap())
        .collect();
    assert_eq!(outputs, ["h.json", "bins.csv"]);
    let mut listed: Vec<String> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    listed.sort();
    assert_eq!(
        listed,
        ["bins.csv", "h.json", "h.json.manifest.json", "in.csv"]
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(ebmine(d, &["--help"]).status.code(), Some(0));
    assert_eq!(ebmine(d, &["--version"]).status.code(), Some(0));
    assert_eq!(ebmine(d, &["frobnicate"]).status.code(), Some(2));
    let out = ebmine(
        d,
        &[
            "fdp-sim",
            "--params",
            "0,0,0,1,0.5",
            "--out",
            "x.json",
            "--turbo",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--turbo"));

    let out = ebmine(
        d,
        &[
            "predict", "--stats", "nope.csv", "--model", "m.json", "--out", "p.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));

    let out = ebmine(
        d,
        &["fdp-sim", "--params", "0,0,0,1,1.5", "--out", "x.json"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));

    std::fs::write(
        d.join("bad.csv"),
        "strategy_id,family,month,ret\na,acct_ew,2000-01,zz\n",
    )
    .unwrap();
    let out = ebmine(d, &["summarize", "--panel", "bad.csv", "--out", "s.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_every_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ebmine(tmp.path(), &["fdr", "--help"]);
    let help = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--method",
        "--q",
        "--p",
        "--stats",
        "--panel",
        "--min-obs",
        "--null-cutoff",
        "--n-boot",
        "--seed",
        "--out",
        "--oos-panel",
        "--bins-out",
        "--n-bins",
        "--by-family",
        "--manifest",
    ] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn small_simulations_from_the_command_line() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "fdp-sim",
            "--params",
            "0,0,0,2.5,0.8",
            "--n-strategies",
            "2000",
            "--n-sims",
            "50",
            "--out",
            "fdp.json",
            "--bins-out",
            "fdp_bins.csv",
        ],
    );
    let fdp: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fdp.json")).unwrap()).unwrap();
    let mean = fdp["mean_fdp"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));
    ok(
        d,
        &[
            "prop1",
            "--params",
            "0,0.1,0,2,0.5",
            "--n-strategies",
            "2000",
            "--reps",
            "3",
            "--top-pct",
            "0.05",
            "--out",
            "p1.json",
        ],
    );
    let p1: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("p1.json")).unwrap()).unwrap();
    assert_eq!(p1["n_identical"], 3);
}

#[test]
fn signals_definitions_and_build() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["signals", "--defs-out", "defs.jsonl"]);
    let n = std::fs::read_to_string(d.join("defs.jsonl"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(n, 19_402 + 19_380);

    // 30 stocks, 40 months, with tickers
    let mut csv = String::from("stock_id,month,ret,mktcap,ticker\n");
    for s in 0..30 {
        for m in 0..40 {
            let r = ((s * 7 + m * 13) % 17) as f64 / 100.0 - 0.08;
            let tk: String = [b'A' + (s % 26) as u8, b'A' + (s / 26) as u8]
                .iter()
                .map(|&b| b as char)
                .collect();
            csv.push_str(&format!(
                "s{s},{}-{:02},{r},{},{tk}\n",
                2000 + m / 12,
                m % 12 + 1,
                10.0 + s as f64
            ));
        }
    }
    std::fs::write(d.join("stocks.csv"), csv).unwrap();
    ok(
        d,
        &[
            "signals",
            "--sources",
            "pastret",
            "--limit",
            "5",
            "--stocks",
            "stocks.csv",
            "--weighting",
            "ew",
            "--out-panel",
            "strat.csv",
        ],
    );
    let rows = std::fs::read_to_string(d.join("strat.csv")).unwrap();
    assert!(rows.lines().nth(1).unwrap().contains("-ew,pastret_ew,"));
}
