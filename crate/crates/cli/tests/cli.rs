use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn chaoslab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chaoslab"))
        .current_dir(dir)
        .env_remove("CHAOSLAB_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v["provenance"]["timestamp"] = Value::Null;
    v
}

#[test]
fn moments_prints_slope_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = chaoslab(dir.path(), &["moments", "--model", "berry", "--d", "2", "--q", "8..128"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    let slope: f64 = line
        .trim()
        .strip_prefix("slope=")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("unexpected summary {line}"));
    assert!((slope + 1.0).abs() < 0.08, "slope {slope}");
    assert!(line.contains("chaoslab-moments.csv"));

    let mut rdr = csv::Reader::from_path(dir.path().join("chaoslab-moments.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["d", "model", "q", "r_max", "signed", "value", "err"]);
    assert_eq!(rdr.records().count(), 121);

    let manifest = read_json(&dir.path().join("chaoslab-moments.csv.manifest.json"));
    let cfg = &manifest["config"];
    assert_eq!(cfg["q"], "8..128");
    assert_eq!(cfg["signed"], true);
    assert_eq!(cfg["r_max"], "inf");
    assert_eq!(cfg["seed"], 0);
    assert_eq!(cfg["schema_version"], 1);
}

#[test]
fn conditions_berry_d3() {
    let dir = tempfile::tempdir().unwrap();
    let o = chaoslab(dir.path(), &["conditions", "--model", "berry", "--d", "3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("cond5 delta=1.0 pass cond6 alpha=2 pass"), "{}", stdout(&o));
    let rep = read_json(&dir.path().join("chaoslab-conditions.json"));
    assert_eq!(rep["results"][0]["delta"], 1.0);
    assert_eq!(rep["results"][0]["alpha"], 2.0);
}

#[test]
fn excluded_case_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = chaoslab(
        dir.path(),
        &["clt", "--model", "berry", "--d", "2", "--phi", "hermite:3", "--t", "4", "--n-reps", "20", "--format", "json"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("excluding the cases"));
    let rep = read_json(&dir.path().join("chaoslab-clt.json"));
    let warnings = rep["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("excluding the cases")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let code = |args: &[&str]| chaoslab(p, args).status.code();
    assert_eq!(code(&["moments", "--model", "berry", "--d", "2", "--n-reps", "3"]), Some(2));
    assert_eq!(code(&["moments", "--model", "bessel", "--d", "2"]), Some(2));
    assert_eq!(code(&["moments", "--model", "berry"]), Some(2));
    assert_eq!(code(&["clt", "--model", "berry", "--d", "2", "--t", "4"]), Some(2));
    assert_eq!(code(&["field", "--model", "berry", "--d", "2", "--format", "json"]), Some(2));
    assert_eq!(code(&["moments", "--model", "berry", "--d", "2", "--q", "1..3", "--signed", "false"]), Some(3));
    assert_eq!(
        code(&[
            "contractions", "--model", "berry", "--d", "2", "--t", "4", "--phi", "hermite:2", "--m", "1", "--k-cap",
            "2", "--n-samples", "2000"
        ]),
        Some(4)
    );
}

#[test]
fn config_file_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let good = p.join("run.json");
    std::fs::write(
        &good,
        r#"{"schema_version": 1, "command": "variance", "model": "exponential", "alpha": 1.0, "d": 1,
            "phi": "hermite:2", "t": [4.0, 8.0], "format": "json", "out": "var.json"}"#,
    )
    .unwrap();
    let o = chaoslab(p, &["variance", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep = read_json(&p.join("var.json"));
    assert_eq!(rep["config"]["shape"], "ball");
    assert_eq!(rep["results"].as_array().unwrap().len(), 2);

    let bad = p.join("bad.json");
    std::fs::write(&bad, r#"{"model": "berry", "d": 2, "temperature": 3}"#).unwrap();
    let o = chaoslab(p, &["moments", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("temperature"));

    let o = chaoslab(p, &["clt", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_report_reparses_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let args = ["variance", "--model", "berry", "--d", "2", "--phi", "hermite:4", "--t", "8", "--format", "json"];
    assert_eq!(chaoslab(p, &[&args[..], &["--out", "a.json"]].concat()).status.code(), Some(0));
    let a = read_json(&p.join("a.json"));
    let text = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<Value>(&text).unwrap(), a);

    // the embedded config alone reproduces the run
    let cfg = p.join("replay.json");
    let mut c = a["config"].clone();
    c["out"] = Value::from("b.json");
    std::fs::write(&cfg, serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(chaoslab(p, &["variance", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let mut b = read_json(&p.join("b.json"));
    b["config"]["out"] = Value::from("a.json");
    assert_eq!(without_timestamp(a), without_timestamp(b));
}

#[test]
fn env_seed_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_chaoslab"))
        .current_dir(dir.path())
        .env("CHAOSLAB_SEED", "4242")
        .args(["field", "--model", "exponential", "--d", "1", "--t", "2", "--h", "0.5", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = read_json(&dir.path().join("chaoslab-field.csv.manifest.json"));
    assert_eq!(m["config"]["seed"], 4242);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let run = |threads: &str, out: &str| {
        let o = chaoslab(
            p,
            &[
                "clt", "--model", "exponential", "--d", "1", "--phi", "hermite:2", "--t", "8", "--n-reps", "40",
                "--h", "0.1", "--seed", "7", "--format", "json", "--threads", threads, "--out", out,
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        read_json(&p.join(out))["results"].clone()
    };
    assert_eq!(run("1", "one.json"), run("4", "four.json"));
}

#[test]
fn field_binary_has_magic_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = chaoslab(
        dir.path(),
        &["field", "--model", "matern", "--mu", "1.5", "--d", "2", "--t", "2", "--h", "0.25", "--format", "bin", "--out", "g.bin"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bytes = std::fs::read(dir.path().join("g.bin")).unwrap();
    assert_eq!(&bytes[..8], b"CHLBGRID");
    assert!(stdout(&o).starts_with("n_values=256"));
}
