//! End-to-end runs of the `quasirigid` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_quasirigid");

fn groups() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/groups")
}

/// Writes `config` into a fresh temp dir and runs `command` on it.
fn run(command: &str, config: Value) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let out = Command::new(BIN)
        .args([command, "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["--threads", "2"])
        .output()
        .unwrap();
    (out, dir)
}

fn group(name: &str) -> Value {
    json!(groups().join(name))
}

fn read_json(dir: &tempfile::TempDir, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.path().join("out").join(name)).unwrap()).unwrap()
}

/// CSV rows after the hash comment and header.
fn read_csv(dir: &tempfile::TempDir, name: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(dir.path().join("out").join(name))
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn group_build_summarizes_rank2() {
    let (out, dir) = run("group-build", json!({ "group": group("rank2.json") }));
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &read_json(&dir, "group.json")["result"];
    assert_eq!(r["circles"].as_array().unwrap().len(), 4);
    let gens = r["generators"].as_array().unwrap();
    assert_eq!(gens.len(), 2);
    assert!(gens.iter().all(|g| g["class"] == "loxodromic"));
    assert_eq!(r["all_loxodromic"], true);
}

#[test]
fn tangent_circles_are_rejected() {
    let (out, _dir) = run("group-build", json!({ "group": group("tangent.json") }));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parabolic"), "{}", stderr(&out));
}

#[test]
fn empty_pairing_list_is_rejected() {
    let (out, _dir) = run("group-build", json!({ "group": group("empty.json") }));
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn inline_group_and_unknown_fields() {
    let inline =
        json!({ "pairings": [{ "A": { "center": [3, 0], "radius": 1 }, "B": { "center": [-3, 0], "radius": 1 } }] });
    let (out, _dir) = run("group-build", json!({ "group": inline }));
    assert!(out.status.success(), "{}", stderr(&out));
    let (out, _dir) = run("group-build", json!({ "group": inline, "grid": 3 }));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fsigma_curve_is_monotone() {
    let cfg = json!({ "fsigma": { "sigma": 1.0, "lambda_min": 1.0, "lambda_max": 8.0, "samples": 64 } });
    let (out, dir) = run("fsigma", cfg);
    assert!(out.status.success(), "{}", stderr(&out));
    let vals: Vec<f64> = read_csv(&dir, "fsigma.csv").iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(vals.len(), 64);
    assert_eq!(vals[0], 0.0);
    assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
}

#[test]
fn bounds_window_for_k2_d1() {
    let (out, dir) = run("bounds", json!({ "bounds": { "k": 2.0, "d": 1.0, "sigma": 1.0 } }));
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &read_json(&dir, "bounds.json")["result"];
    assert!((r["lower"].as_f64().unwrap() - 0.4).abs() < 1e-15);
    assert!((r["upper"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-15);
}

#[test]
fn rank1_limit_set_has_dimension_zero() {
    let (out, dir) = run("limit", json!({ "group": group("rank1.json") }));
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &read_json(&dir, "dimension.json")["result"];
    assert_eq!(r["dimension"]["dimension"].as_f64().unwrap(), 0.0);
    assert_eq!(read_csv(&dir, "limit_points.csv").len(), 2);
}

fn sweep(values: &[f64]) -> Value {
    json!({
        "group": group("rank2.json"),
        "grid_n": 16,
        "sweep": { "family": "linear-beltrami", "values": values },
    })
}

fn norms(dir: &tempfile::TempDir) -> Vec<(f64, f64)> {
    read_csv(dir, "srel_sweep.csv").iter().map(|r| (r[0].parse().unwrap(), r[2].parse().unwrap())).collect()
}

#[test]
fn identity_sweep_is_rigid() {
    let (out, dir) = run("srel-sweep", sweep(&[0.0]));
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = norms(&dir);
    assert_eq!(rows.len(), 1);
    assert!(rows[0].1 < 1e-6, "{rows:?}");
}

#[test]
fn sweep_norms_are_nondecreasing() {
    let (out, dir) = run("srel-sweep", sweep(&[0.2, 0.0, 0.1]));
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = norms(&dir);
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), [0.0, 0.1, 0.2]);
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1), "{rows:?}");
}

#[test]
fn sweep_rejects_s_at_the_abscissa() {
    let mut cfg = sweep(&[0.0, 0.1]);
    cfg["s"] = json!([1.0, 0.0]);
    let (out, _dir) = run("srel-sweep", cfg);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("regime"), "{}", stderr(&out));
}

#[test]
fn failed_sweep_rows_give_exit_1() {
    // |μ| ≥ 1 is not a diffeomorphism; the row fails and the run continues.
    let (out, dir) = run("srel-sweep", sweep(&[0.1, 1.5]));
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let rows = read_csv(&dir, "srel_sweep.csv");
    assert_eq!(rows.len(), 3);
    assert!(!rows[2][5].is_empty() && rows[1][5].is_empty(), "{rows:?}");
}

#[test]
fn outputs_are_deterministic_and_stamped() {
    let cfg = json!({
        "group": group("rank2.json"),
        "diffeo": { "family": "linear-beltrami", "mu": [0.1, 0.0] },
        "grid_n": 12,
        "kernel": { "pairs": [[[0.3, 0.2], [-0.5, 0.4]]], "matrix": true },
        "sweep": { "family": "linear-beltrami", "values": [0.0, 0.1] },
        "bounds": { "k": 2.0, "d": 1.0, "sigma": 1.0, "epsilons": [0.1] },
    });
    let cmds = ["group-build", "limit", "kernel", "srel-sweep", "fsigma", "bounds", "probe", "report"];
    let runs: Vec<_> = (0..2)
        .map(|_| {
            cmds.iter()
                .map(|c| {
                    let (out, dir) = run(c, cfg.clone());
                    assert!(out.status.success(), "{c}: {}", stderr(&out));
                    dir
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let hash = read_json(&runs[0][0], "group.json")["config_hash"].as_str().unwrap().to_owned();
    assert_eq!(hash.len(), 64);
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        for entry in std::fs::read_dir(a.path().join("out")).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap();
            let bytes = std::fs::read(&path).unwrap();
            assert_eq!(bytes, std::fs::read(b.path().join("out").join(name)).unwrap(), "{name:?} differs");
            if path.extension().unwrap() != "bin" {
                assert!(String::from_utf8(bytes).unwrap().contains(&hash), "{name:?} lacks the hash");
            }
        }
    }
}

#[test]
fn seed_flag_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "{}").unwrap();
    let hash = |seed: &str| {
        let out = dir.path().join(seed);
        let st =
            Command::new(BIN).args(["fsigma", "--seed", seed, "--config"]).arg(&cfg).arg("--out").arg(&out).output();
        assert!(st.unwrap().status.success());
        std::fs::read_to_string(out.join("fsigma.csv")).unwrap().lines().next().unwrap().to_owned()
    };
    assert_ne!(hash("1"), hash("2"));
}
