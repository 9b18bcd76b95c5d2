use std::path::Path;
use std::process::{Command, Output};

fn ddn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddn")).args(args).output().expect("run ddn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn loss_single_table_and_max_row() {
    let o = ddn(&["loss-single", "--from", "0.01", "--to", "0.49", "--step", "0.01"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r.iter().filter(|r| r[0] == "grid").count(), 49);
    let max = r.iter().find(|r| r[0] == "max").unwrap();
    assert_eq!(max[1], "0.292893218813");
    assert_eq!(max[2], "0.0857864376269");

    let o = ddn(&["loss-single", "--theta", "0.25"]);
    assert_eq!(rows(&stdout(&o))[0][2], "0.0833333333333");
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["loss-single", "--from", "0.3", "--to", "0.1"][..],
        &["loss-multi", "--K", "4", "--theta", "0.2"],
        &["wf-gap", "--K", "2", "--theta", "0.2"],
        &["simulate", "--theta", "0.2", "--K", "3", "--trials", "0"],
        &["verify", "--suite", "nope"],
        &["no-such-command"],
    ] {
        let o = ddn(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn loss_multi_examples() {
    let o = ddn(&["loss-multi", "--K", "51", "--x", "inf", "--from", "0.020", "--to", "0.035", "--step", "0.001"]);
    let r = rows(&stdout(&o));
    let signs: Vec<(f64, bool)> = r
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse::<f64>().unwrap() > 0.0))
        .collect();
    let flip = signs.windows(2).find(|w| w[0].1 != w[1].1).unwrap();
    assert!(flip[0].0 >= 0.025 && flip[1].0 <= 0.029, "{flip:?}");

    let o = ddn(&["loss-multi", "--K", "9", "--x", "1"]);
    assert!(rows(&stdout(&o)).iter().all(|r| r[1] == "0" && r[2] == "1"));

    let o = ddn(&["loss-multi", "--K", "1", "--x", "inf", "--theta", "0.25"]);
    assert_eq!(rows(&stdout(&o))[0][1], "0.0833333333333");
}

#[test]
fn wf_gap_examples() {
    let o = ddn(&["wf-gap", "--K", "3", "--theta", "0.2", "--equivalent"]);
    assert!(o.status.success());
    let r = rows(&stdout(&o));
    assert_eq!(r[0][4], "0.0886153846154");
    assert_eq!(r[0][5], "0");
    assert_eq!(r[0][9], "2");

    let o = ddn(&["wf-gap", "--K", "1", "--theta", "0.2"]);
    assert_eq!(rows(&stdout(&o))[0][4], "0");

    let o = ddn(&["wf-gap", "--K", "10001", "--sup"]);
    let loss: f64 = rows(&stdout(&o))[0][2].parse().unwrap();
    assert!(loss > 0.45 && loss < 0.5);
}

#[test]
fn simulate_is_reproducible_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = ddn(&[
            "simulate", "--theta", "0.2", "--K", "5", "--trials", "20000", "--seed", "7", "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["subcommand"], "simulate");
}

#[test]
fn simulate_generates_seed_when_missing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = ddn(&["simulate", "--theta", "0.3", "--K", "3", "--system", "wf", "--k", "0", "--trials", "5000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.csv.manifest.json")).unwrap()).unwrap();
    assert!(manifest["seed"].is_u64());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# defaults\ntheta = 0.3\nK = 3\ntrials = 1000\nseed = 5\nformat = json\n").unwrap();
    let o = ddn(&["simulate", "--config", cfg.to_str().unwrap(), "--trials", "2000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"][0][6], 2000);
}

#[test]
fn verify_json_report() {
    let o = ddn(&["verify", "--suite", "prop2", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["claims"]["consensus_even_odd_equality"]["status"], "pass");
    assert_eq!(v["claims"]["complementarity"]["tolerance"], 1e-12);
}

#[test]
fn roc_curves_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roc.csv");
    let o = ddn(&["loss-single", "--theta", "0.2", "--roc-curves", path.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let r = rows(&text);
    for curve in ["l1", "l2", "gaussian_roc", "apex"] {
        assert!(r.iter().any(|row| row[0] == curve));
    }
    assert!(Path::new(&path).exists());
}

#[test]
fn analytic_output_is_bit_reproducible() {
    let a = ddn(&["wf-gap", "--K", "7", "--from", "0.05", "--to", "0.45", "--step", "0.05"]);
    let b = ddn(&["wf-gap", "--K", "7", "--from", "0.05", "--to", "0.45", "--step", "0.05"]);
    assert_eq!(a.stdout, b.stdout);
}
