use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_equipart");

fn equipart(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = equipart(dir, args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Every file under `dir` except the manifest, keyed by name.
fn contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

/// Data lines of a grid field or CSV table, header lines dropped.
fn column(path: &Path, col: usize) -> Vec<f64> {
    fs::read_to_string(path).unwrap().lines().filter_map(|l| l.split(',').nth(col)?.parse().ok()).collect()
}

fn workspace() -> TempDir {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("p.csv"), "# box=0 res=4 bounds=0:4\n0.64\n0.04\n0.16\n0.16\n").unwrap();
    let mut g = String::from("# box=0 res=6,6 bounds=0:1,0:1\n");
    for i in 0..6 {
        for j in 0..6 {
            let (x, y) = ((i as f64 + 0.5) / 6.0, (j as f64 + 0.5) / 6.0);
            g.push_str(&format!("{}\n", (-((x - 0.3).powi(2) + (y - 0.6).powi(2)) / 0.05).exp()));
        }
    }
    fs::write(d.join("g.csv"), g).unwrap();
    fs::write(d.join("path.txt"), "% three nodes\n1 2\n2 3\n").unwrap();
    fs::write(d.join("pn.txt"), "0.5\n0.3\n0.2\n").unwrap();
    tmp
}

#[test]
fn static_power_law_example() {
    let tmp = workspace();
    ok(tmp.path(), &["static", "--loss", "powerlaw:1", "--density", "p.csv", "--budget", "1.8", "--out-dir", "out"]);
    let s = column(&tmp.path().join("out/solution.csv"), 0);
    for (got, want) in s.iter().zip([0.8, 0.2, 0.4, 0.4]) {
        assert!((got - want).abs() < 1e-12, "{s:?}");
    }
    assert_eq!(s.len(), 4);
}

#[test]
fn network_three_node_path() {
    let tmp = workspace();
    ok(
        tmp.path(),
        &[
            "network",
            "--edges",
            "path.txt",
            "--density",
            "pn.txt",
            "--budget",
            "1",
            "--mode",
            "analytic",
            "--out-dir",
            "out",
        ],
    );
    let s = column(&tmp.path().join("out/allocation.csv"), 2);
    let a = 0.8f64.sqrt() / (0.8f64.sqrt() + 0.5f64.sqrt());
    assert_eq!(s.len(), 2);
    assert!((s[0] - a).abs() < 1e-12 && (s[1] - (1.0 - a)).abs() < 1e-12, "{s:?}");
    assert!((s[0] - 0.5585).abs() < 1e-4);
}

#[test]
fn misspec_equal_widths_cost_nothing() {
    let tmp = workspace();
    ok(tmp.path(), &["misspec", "--ratio", "1.0", "--out-dir", "out"]);
    assert_eq!(column(&tmp.path().join("out/rho.csv"), 1), vec![0.0]);
}

#[test]
fn every_subcommand_replays_bit_identically() {
    let tmp = workspace();
    let cases: &[&[&str]] = &[
        &["static", "--density", "g.csv", "--loss", "median:2"],
        &["hot-lattice", "--rows", "6", "--cols", "6"],
        &["kmedians", "--n", "400", "--k", "8", "--iters", "30", "--resolution", "40"],
        &["diffuse", "--density", "g.csv", "--points", "60", "--steps", "8"],
        &["invert", "--response", "g.csv", "--candidates", "g.csv"],
        &["dynamics", "--density", "p.csv", "--budget", "1.8", "--steps", "100", "--snapshot-every", "50"],
        &["misspec", "--samples", "500", "--ratio", "1.2,1.5"],
        &["infer-categorical", "--n-obs", "100"],
        &["infer-kde", "--paths", "10,30", "--x-points", "20"],
        &["network", "--graph", "ba:25:2", "--density", "random", "--mode", "fixed-point"],
        &["anneal", "--problem", "binary-test", "--max-iters", "2000", "--restarts", "2"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = format!("run{i}");
        let again = format!("replay{i}");
        let mut full = args.to_vec();
        full.extend(["--seed", "5", "--out-dir", &out]);
        ok(tmp.path(), &full);
        let manifest = format!("{out}/manifest.json");
        ok(tmp.path(), &["replay", &manifest, "--out-dir", &again]);
        let (a, b) = (contents(&tmp.path().join(&out)), contents(&tmp.path().join(&again)));
        assert!(!a.is_empty(), "{args:?} wrote nothing");
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn manifest_records_run() {
    let tmp = workspace();
    ok(tmp.path(), &["static", "--density", "p.csv", "--seed", "9", "--out-dir", "out"]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["subcommand"], "static");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["budget"], 1.0);
    assert_eq!(m["inputs"][0]["path"], "p.csv");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["solution.csv", "summary.json"]);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert!(m["artifact_version"].is_string());
}

#[test]
fn exit_codes() {
    let tmp = workspace();
    let d = tmp.path();
    assert_eq!(code(&equipart(d, &["static", "--no-such-flag"])), 1);
    assert_eq!(code(&equipart(d, &["frobnicate"])), 1);
    let missing = equipart(d, &["static", "--density", "absent.csv", "--out-dir", "o1"]);
    assert_eq!(code(&missing), 1);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.csv"));
    fs::write(d.join("bad.txt"), "1 2\n3 3\n").unwrap();
    let bad = equipart(d, &["network", "--edges", "bad.txt", "--out-dir", "o2"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("line 2"));
    let stuck =
        equipart(d, &["static", "--density", "g.csv", "--method", "numeric", "--max-iter", "1", "--out-dir", "o3"]);
    assert_eq!(code(&stuck), 2, "{}", String::from_utf8_lossy(&stuck.stderr));
    assert_eq!(code(&equipart(d, &["--help"])), 0);
}

#[test]
fn tampered_manifest_diverges() {
    let tmp = workspace();
    let d = tmp.path();
    ok(d, &["misspec", "--ratio", "1.5", "--samples", "200", "--out-dir", "out"]);
    let path = d.join("out/manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = "0".repeat(64).into();
    fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let out = equipart(d, &["replay", "out/manifest.json", "--out-dir", "again"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho.csv"));
}

#[test]
fn config_file_layers_under_flags() {
    let tmp = workspace();
    let d = tmp.path();
    fs::write(d.join("run.toml"), "seed = 3\nout-dir = \"cfg-out\"\n\n[static]\ndensity = \"p.csv\"\nbudget = 1.8\n")
        .unwrap();
    ok(d, &["static", "--config", "run.toml"]);
    let s = column(&d.join("cfg-out/solution.csv"), 0);
    assert!((s[0] - 0.8).abs() < 1e-12, "{s:?}");
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("cfg-out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);

    ok(d, &["static", "--config", "run.toml", "--budget", "3.6", "--out-dir", "flag-out"]);
    let s = column(&d.join("flag-out/solution.csv"), 0);
    assert!((s[0] - 1.6).abs() < 1e-12, "{s:?}");

    fs::write(d.join("typo.toml"), "[static]\nbudgett = 2\n").unwrap();
    let out = equipart(d, &["static", "--config", "typo.toml", "--density", "p.csv", "--out-dir", "o"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("budgett"));
}

#[test]
fn json_format_and_thread_count_do_not_change_numbers() {
    let tmp = workspace();
    let d = tmp.path();
    let base = ["infer-kde", "--paths", "10,40", "--x-points", "20", "--seed", "2"];
    let with = |extra: &[&str]| -> PathBuf {
        let out = format!("out{}", extra.join("_"));
        let mut args = base.to_vec();
        args.extend(extra);
        args.extend(["--out-dir", &out]);
        ok(d, &args);
        d.join(out)
    };
    let one = with(&["--threads", "1"]);
    let four = with(&["--threads", "4"]);
    assert_eq!(contents(&one), contents(&four));
    let json = with(&["--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&fs::read_to_string(json.join("l1.json")).unwrap()).unwrap();
    let csv = column(&one.join("l1.csv"), 2);
    let from_json: Vec<f64> = rows.as_array().unwrap().iter().map(|r| r["l1"].as_f64().unwrap()).collect();
    assert_eq!(from_json, csv);
}
