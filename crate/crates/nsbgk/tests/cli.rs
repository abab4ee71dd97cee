//! End-to-end checks of the command-line surface: exit codes, error
//! messages naming the offender, byte determinism, and the artifact files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsbgk"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nsbgk_cli_{tag}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const EQ_CONFIG: &str = "\
# spatially uniform particles over a uniform fluid
dim = 1
cells = 32
v_cells = 64
v_max = 8
dt = 1e-3
t_final = 0.02
init = uniform
";

#[test]
fn no_arguments_prints_usage_and_exits_1() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("USAGE"), "{err}");
}

#[test]
fn unknown_subcommand_and_flag_exit_1() {
    let out = bin().arg("simulate").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown subcommand"));

    let out = bin().args(["check", "--sede", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown flag --sede"));
}

#[test]
fn config_errors_name_the_offender_and_exit_1() {
    let dir = tempdir("cfgerr");
    let bad_k = write_config(&dir, "bad_k.cfg", "k = 2.0\n");
    let out = bin()
        .args(["run", "--config"])
        .arg(&bad_k)
        .args(["--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("open interval (1,2)"));

    let typo = write_config(&dir, "typo.cfg", "gama = 1.4\n");
    let out = bin()
        .args(["run", "--config"])
        .arg(&typo)
        .args(["--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown configuration key 'gama'"));

    let bad_eps = write_config(&dir, "bad_eps.cfg", "k = 1.5\neps = 1.6\n");
    let out = bin()
        .args(["run", "--config"])
        .arg(&bad_eps)
        .args(["--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 < eps < k"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn equilibrium_run_is_deterministic_with_small_drifts() {
    let dir = tempdir("eqrun");
    let cfg = write_config(&dir, "eq.cfg", EQ_CONFIG);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let st = bin()
            .args(["run", "--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(
            st.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&st.stderr)
        );
    }
    let csv_a = fs::read(out_a.join("diagnostics.csv")).unwrap();
    let csv_b = fs::read(out_b.join("diagnostics.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "repeat runs must be byte-identical");

    // conserved-quantity columns drift below 1e-8 between first and last row
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let last: Vec<f64> = text
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    for name in ["particle_mass", "fluid_mass"] {
        let idx = header.iter().position(|h| *h == name).unwrap();
        let drift = ((last[idx] - first[idx]) / first[idx]).abs();
        assert!(drift <= 1e-8, "{name} drift {drift:e}");
    }
    let idx = header.iter().position(|h| *h == "momentum_x").unwrap();
    assert!(last[idx].abs() <= 1e-8, "momentum {:e}", last[idx]);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn snapshots_write_and_resume_continues() {
    let dir = tempdir("resume");
    let cfg = write_config(&dir, "eq.cfg", EQ_CONFIG);
    let out = dir.join("out");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .args(["--snapshot-every", "10"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(out.join("snap_000020").join("manifest.txt").exists());

    // resume picks the latest snapshot and marches another t_final
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .args(["--snapshot-every", "10", "--resume"])
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let text = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let last = text.lines().last().unwrap().split(',').next().unwrap();
    let t_final: f64 = last.parse().unwrap();
    assert!(
        (t_final - 0.04).abs() < 1e-12,
        "resumed run should end at 0.04, got {t_final}"
    );
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn iterate_writes_trace_with_ratio_column() {
    let dir = tempdir("iterate");
    let cfg = write_config(
        &dir,
        "small.cfg",
        "dim = 1\ncells = 32\nv_cells = 48\nv_max = 8\ndt = 1.25e-3\n\
         init = perturbed\ninit_rho_f = 0.5\ninit_amp = 5e-3\nseed = 11\n",
    );
    let st = bin()
        .args(["iterate", "--config"])
        .arg(&cfg)
        .args([
            "--horizon",
            "0.05",
            "--max-iters",
            "6",
            "--tol",
            "1e-9",
            "--out",
        ])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let trace = fs::read_to_string(dir.join("out").join("iteration_trace.csv")).unwrap();
    assert!(trace.starts_with("iterate,sup_e,ratio,sup_d"));
    assert!(trace.lines().count() >= 2);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn diagnose_reads_back_a_snapshot() {
    let dir = tempdir("diag");
    let cfg = write_config(&dir, "eq.cfg", EQ_CONFIG);
    let out = dir.join("out");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .args(["--snapshot-every", "20"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    let st = bin()
        .args(["diagnose", "--config"])
        .arg(&cfg)
        .args(["--snapshot"])
        .arg(out.join("snap_000020"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.contains("particle_mass ="));
    assert!(text.contains("monitor symmetrized_density_floor"));

    // fault injection: truncate an array and expect a checksum error naming it
    let snap = out.join("snap_000020");
    let path = snap.join("h.csv");
    let data = fs::read_to_string(&path).unwrap();
    fs::write(&path, &data[..data.len() / 3]).unwrap();
    let st = bin()
        .args(["diagnose", "--config"])
        .arg(&cfg)
        .args(["--snapshot"])
        .arg(&snap)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("h.csv"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn json_config_runs_identically_to_ini() {
    let dir = tempdir("json");
    let ini = write_config(&dir, "eq.cfg", EQ_CONFIG);
    let json = write_config(
        &dir,
        "eq.json",
        r#"{"dim": 1, "cells": 32, "v_cells": 64, "v_max": 8, "dt": 1e-3,
            "t_final": 0.02, "init": "uniform"}"#,
    );
    let out_ini = dir.join("ini");
    let out_json = dir.join("json");
    for (cfg, out) in [(&ini, &out_ini), (&json, &out_json)] {
        let st = bin()
            .args(["run", "--config"])
            .arg(cfg)
            .args(["--out"])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let a = fs::read(out_ini.join("diagnostics.csv")).unwrap();
    let b = fs::read(out_json.join("diagnostics.csv")).unwrap();
    assert_eq!(a, b, "equivalent INI and JSON configs must produce identical output");
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn monitor_violation_aborts_with_dump_and_exit_2() {
    let dir = tempdir("abort");
    // a kinetic density floor far above the actual value trips at step one
    let cfg = write_config(
        &dir,
        "trip.cfg",
        "dim = 1\ncells = 32\nv_cells = 48\nv_max = 8\ndt = 1e-3\nt_final = 0.01\n\
         init = uniform\nrho_f_floor = 10.0\n",
    );
    let out = dir.join("out");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    assert!(String::from_utf8_lossy(&st.stderr).contains("kinetic_density_floor"));
    assert!(
        out.join("dump").join("manifest.txt").exists(),
        "abort must dump the state"
    );
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn decay_emits_fit_and_series() {
    let dir = tempdir("decay");
    let cfg = write_config(
        &dir,
        "decay.cfg",
        "dim = 1\ncells = 32\nv_cells = 64\nv_max = 8\ndt = 1.5e-3\nt_final = 0.5\nmu = 0.5\n\
         init = uniform\ninit_rho = 0.25\ninit_rho_f = 0.5\ninit_t_f = 1.2\n",
    );
    let st = bin()
        .args(["decay", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.contains("fit: amplitude"));
    assert!(dir.join("out").join("decay.csv").exists());
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn check_subcommand_passes_on_default_seed() {
    let st = bin().args(["check", "--seed", "3"]).output().unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let text = String::from_utf8_lossy(&st.stdout);
    assert!(text.contains("all checks passed"));
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 6);
}

#[test]
fn resume_without_snapshots_is_a_named_error() {
    let dir = tempdir("noresume");
    let cfg = write_config(&dir, "eq.cfg", EQ_CONFIG);
    let out = dir.join("out");
    fs::create_dir_all(&out).unwrap();
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .args(["--resume"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&st.stderr).contains("no snapshots found"));
    let _ = fs::remove_dir_all(&dir);
}
