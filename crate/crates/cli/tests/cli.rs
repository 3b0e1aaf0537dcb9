use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cantor_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/cantor.json")
}

fn koksma(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koksma"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env_remove("KOKSMA_OUT")
        .env_remove("KOKSMA_THREADS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("cfg.json");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn validate_reports_both_hypotheses() {
    let o = koksma(&cantor_config(), &["validate"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["command"], "validate");
    assert_eq!(v["result"]["ok"], true);
    assert_eq!(v["result"]["ifs"]["gap_min"], "1/3");
    assert_eq!(v["result"]["entropy"]["pass"], true);
}

#[test]
fn overlapping_ifs_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"ifs": {"r": "1/2", "t": ["0", "1/4"], "p": ["1/2", "1/2"]},
            "family": {"kind": "pure_power"}}"#,
    );
    let o = koksma(&cfg, &["validate"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["result"]["ok"], false);
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"ifs": {"r": "1/3", "t": ["2/3", "4/3"], "p": ["1/2", "1/2"]},
            "family": {"kind": "pure_power"}, "sead": 1}"#,
    );
    let o = koksma(&cfg, &["validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));
}

#[test]
fn stochastic_command_without_seed_exits_2() {
    let o = koksma(&cantor_config(), &["del-series", "--schedule", "5:10:5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn sampled_orbit_has_one_row_per_index() {
    let o = koksma(
        &cantor_config(),
        &["orbit", "--word-seed", "7", "--depth", "auto", "--N", "4000"],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("# max_err: ")));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 4000);
    for (i, row) in rows.iter().enumerate() {
        let (n, v) = row.split_once(',').unwrap();
        assert_eq!(n.parse::<usize>().unwrap(), i + 1);
        let v: f64 = v.parse().unwrap();
        assert!((0.0..1.0).contains(&v));
    }
}

#[test]
fn exact_orbit_matches_dyadic_values() {
    let o = koksma(&cantor_config(), &["orbit", "--x", "3/2", "--N", "4"]);
    let text = stdout(&o);
    let vals: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    // 3/2, 9/4, 27/8, 81/16 mod 1
    assert_eq!(vals, vec![0.5, 0.25, 0.375, 0.0625]);
}

#[test]
fn decay_is_reproducible_across_runs_and_thread_counts() {
    let args = [
        "decay", "--seed", "5", "--schedule", "5:60:5", "--samples", "300", "--replicates", "3",
    ];
    let a = koksma(&cantor_config(), &args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = koksma(&cantor_config(), &args);
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let c = koksma(&cantor_config(), &one);
    let mut four = args.to_vec();
    four.extend(["--threads", "4"]);
    let d = koksma(&cantor_config(), &four);
    let mut seq = args.to_vec();
    seq.push("--sequential");
    let e = koksma(&cantor_config(), &seq);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(a.stdout, d.stdout);
    assert_eq!(a.stdout, e.stdout);
    assert_eq!(stdout(&a).lines().filter(|l| !l.starts_with('#')).count(), 13);
}

#[test]
fn loose_tolerance_is_refused_with_exit_3() {
    let o = koksma(
        &cantor_config(),
        &["discrepancy", "--seed", "1", "--ns", "100", "--count", "2", "--tol", "0.01", "--depth", "3"],
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("precision"));
}

#[test]
fn csv_is_refused_for_json_only_commands() {
    let o = koksma(&cantor_config(), &["validate", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_has_every_section() {
    let o = koksma(
        &cantor_config(),
        &[
            "report", "--seed", "1", "--schedule", "5:30:5", "--samples", "500", "--replicates", "3",
            "--ns", "100,200", "--count", "4",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v["result"];
    assert_eq!(r["validate"]["ok"], true);
    assert_eq!(r["constants"]["n_kappa"], 5);
    for key in ["gamma_hat", "slope", "slope_stderr", "significant", "rows"] {
        assert!(!r["decay"][key].is_null(), "{key}");
    }
    assert_eq!(r["decay"]["rows"].as_array().unwrap().len(), 6);
    assert_eq!(r["discrepancy"]["median_d_star"].as_array().unwrap().len(), 2);
    // defaults actually used are echoed back
    assert_eq!(v["config"]["lag"], 1);
    assert_eq!(v["config"]["prefix"], "2,2,2,2,2");
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_koksma"))
        .arg("--config")
        .arg(cantor_config())
        .args(["hoeffding", "--delta", "0.05", "--M", "8"])
        .env("KOKSMA_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let path = dir.path().join("hoeffding.csv");
    assert_eq!(stdout(&o).trim(), path.display().to_string());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# command: hoeffding\n"));
    assert!(text.contains("k,mass,mass_f64,bound\n"));
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = koksma(
        &cantor_config(),
        &["del-series", "--seed", "9", "--schedule", "5:20:5", "--samples", "40"],
    );
    let text = stdout(&first);
    let echoed = text
        .lines()
        .find_map(|l| l.strip_prefix("# config: "))
        .unwrap();
    let cfg = write_config(dir.path(), echoed);
    let second = koksma(&cfg, &["del-series"]);
    assert_eq!(first.stdout, second.stdout);
}
