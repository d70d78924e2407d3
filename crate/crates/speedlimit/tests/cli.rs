use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use speedlimit_core::linreg::{tsl_limits, Limit, MpParams};

fn speedlimit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speedlimit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn run_ok(args: &[&str]) {
    let out = speedlimit(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const SCALING: &str = "\
seed = 11
[parameters]
alpha = 1.0
delta = 0.0
n_modes = 100000
t_min = 100.0
t_max = 10000.0
";

#[test]
fn empty_config_lists_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.toml", "");
    let out = speedlimit(&[
        "ntk-scaling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "unused",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["alpha", "delta", "n_modes", "t_min", "t_max"] {
        assert!(err.contains(&format!("parameters.{key}")), "{err}");
    }
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn scaling_sweep_is_linear_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "scaling.toml", SCALING);
    let cfg = cfg.to_str().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&["ntk-scaling", "--config", cfg, "--out", a.to_str().unwrap()]);
    run_ok(&["ntk-scaling", "--config", cfg, "--out", b.to_str().unwrap()]);

    for name in ["reports.tsv", "slopes.tsv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let reports = data_rows(&a.join("reports.tsv"));
    assert_eq!(reports.len(), 20);
    assert!(reports.iter().all(|r| r.len() == 7));
    let slopes = data_rows(&a.join("slopes.tsv"));
    let t_sl_slope = slopes[0][2];
    assert!((t_sl_slope - 1.0).abs() <= 0.05, "{t_sl_slope}");

    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "ntk_scaling");
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["parameters"]["n_modes"], 100000);
    assert_eq!(summary["results"]["reports"].as_array().unwrap().len(), 20);
    assert!(summary["versions"]["speedlimit-core"].is_string());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "finite.toml",
        "seed = 1\n[parameters]\nd = 20\ngamma = 0.5\nlambda = 1\nbeta = 1\nalpha = 1\nn_seeds = 2\n",
    );
    let cfg = cfg.to_str().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    run_ok(&[
        "linreg-finite",
        "--config",
        cfg,
        "--out",
        a.to_str().unwrap(),
    ]);
    run_ok(&[
        "linreg-finite",
        "--config",
        cfg,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    run_ok(&[
        "linreg-finite",
        "--config",
        cfg,
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    let read = |d: &Path| fs::read(d.join("reports.tsv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

/// The β sweep approaches the closed-form large-β limit of the same
/// quantity.
#[test]
fn beta_sweep_approaches_its_limit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "asym.toml",
        "[parameters]\ngamma = 2.0\nlambda = 1.0\nbeta = 1.0\nalpha = 1.0\n\
         [parameters.sweep]\nparameter = \"beta\"\nvalues = [1e2, 1e3, 1e4, 1e5, 1e6]\n",
    );
    let out = dir.path().join("out");
    run_ok(&[
        "linreg-asymptotic",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let rows = data_rows(&out.join("sweep.tsv"));
    assert_eq!(rows.len(), 5);
    let limit = tsl_limits(
        &MpParams {
            gamma: 2.0,
            lambda: 1.0,
            beta: 1.0,
            alpha: 1.0,
        },
        Limit::BetaInf,
    )
    .unwrap();
    let last = rows[4][3];
    assert!((last - limit).abs() / limit < 0.01, "{last} vs {limit}");
}

#[test]
fn simulated_flow_is_analyzed_through_the_archive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ou.toml",
        "seed = 3\n[parameters]\neigenvalues = [0.5, 1.0, 2.0, 4.0]\ninit_mean = [1.0, -2.0, 0.5, 3.0]\n\
         init_variance = 0.2\nbeta_inv = 0.05\ndt = 0.005\nhorizon = 3.0\nn_realizations = 200\nn_points = 6\n",
    );
    let sim = dir.path().join("sim");
    run_ok(&[
        "langevin-sim",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(data_rows(&sim.join("moments.tsv")).len(), 4);

    let an = dir.path().join("an");
    run_ok(&[
        "analyze",
        "--archive",
        sim.join("gradient_flow").to_str().unwrap(),
        "--out",
        an.to_str().unwrap(),
        "--warm-start",
        "100",
        "--triplets",
        "0,1,2;1,2,3",
    ]);
    for name in ["cold.tsv", "warm.tsv", "triplet_0.tsv", "triplet_1.tsv"] {
        assert!(an.join(name).exists(), "{name}");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(an.join("summary.json")).unwrap()).unwrap();
    let ineff = summary["results"]["cold"]["inefficiency"].as_f64().unwrap();
    assert!(ineff >= 1.0 - 10.0 * 0.005 * 4.0, "{ineff}");
    assert_eq!(summary["results"]["warm_start"], 100);

    // triplet endpoints are the trajectory endpoints
    let trace = data_rows(&an.join("triplet_1.tsv"));
    assert_eq!(&trace[0][1..], &[-2.0, 0.5, 3.0]);
}

#[test]
fn bad_triplets_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let cfg = write(
        dir.path(),
        "ou.toml",
        "[parameters]\neigenvalues = [1.0, 2.0]\ninit_variance = 0.1\nbeta_inv = 0.1\ndt = 0.01\nhorizon = 1.0\nn_realizations = 10\n",
    );
    run_ok(&[
        "langevin-sim",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        sim.to_str().unwrap(),
    ]);
    let archive = sim.join("gradient_flow");
    let out_dir = dir.path().join("an");
    for triplets in ["0,1", "0,1,2"] {
        let out = speedlimit(&[
            "analyze",
            "--archive",
            archive.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--triplets",
            triplets,
        ]);
        assert_eq!(out.status.code(), Some(2), "{triplets}");
    }
}

#[test]
fn malformed_archive_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let archive = dir.path().join("broken");
    fs::create_dir(&archive).unwrap();
    write(
        &archive,
        "manifest.toml",
        "dimension = 2\ncheckpoints = 2\n",
    );
    write(&archive, "metrics.csv", "time,loss\n0,1\n1,0.5\n");
    fs::write(archive.join("weights.bin"), b"TSLW0001\0\0\0").unwrap();
    let out = speedlimit(&[
        "analyze",
        "--archive",
        archive.to_str().unwrap(),
        "--out",
        dir.path().join("an").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("expected 40 bytes") && err.contains("found 11"),
        "{err}"
    );
}

#[test]
fn unstable_step_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ou.toml",
        "[parameters]\neigenvalues = [1.0, 50.0]\ninit_variance = 0.1\nbeta_inv = 0.1\ndt = 0.1\nhorizon = 1.0\nn_realizations = 10\n",
    );
    let out = speedlimit(&[
        "langevin-sim",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn kind_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.toml",
        &format!("kind = \"linreg_finite\"\n{SCALING}"),
    );
    let out = speedlimit(&[
        "ntk-scaling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
