//! CLI-level acceptance: determinism of artifacts (criterion 10) and the
//! declared exit codes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use novikov_lab::{
    run_experiment, Command, ExperimentConfig, GridConfig, InitialData, PeakonPair, RunError,
    SolverKind, TimeConfig, EXIT_BLOWUP, EXIT_INVALID_CONFIG, EXIT_NO_COLLISION,
};

fn concentration_config(n: usize, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        command: Command::Concentration,
        initial_data: InitialData::Peakons {
            pairs: vec![
                PeakonPair { p: 1.0, q: -0.5 },
                PeakonPair { p: -0.5, q: 0.5 },
            ],
            smoothing: 0.0,
        },
        grid: GridConfig { l: 20.0, n },
        time: TimeConfig {
            t_end: 3.0,
            dt: 1e-3,
        },
        solver: SolverKind::Rk4,
        output_dir: out.to_path_buf(),
        seed: 42,
    }
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("novikov-lab-acceptance-{name}"));
    let _ = fs::remove_dir_all(&dir);
    dir
}

/// Deterministic artifact bytes: everything except the wall-clock stats.
fn artifact_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == "run_stats.json" {
            continue;
        }
        out.insert(name, fs::read(entry.path()).unwrap());
    }
    out
}

#[test]
fn criterion_10_determinism() {
    let out_a = fresh_dir("det-a");
    let out_b = fresh_dir("det-b");
    let cfg = concentration_config(1024, &out_a);
    let summary_a = run_experiment(&cfg, Some(&out_a)).expect("first run");
    let summary_b = run_experiment(&cfg, Some(&out_b)).expect("second run");
    assert!(!summary_a.events.is_empty(), "collision must register");
    assert_eq!(summary_a.files, summary_b.files);

    let bytes_a = artifact_bytes(&out_a);
    let bytes_b = artifact_bytes(&out_b);
    assert_eq!(
        bytes_a.keys().collect::<Vec<_>>(),
        bytes_b.keys().collect::<Vec<_>>()
    );
    let mut compared = 0usize;
    for (name, a) in &bytes_a {
        let b = &bytes_b[name];
        assert_eq!(a, b, "artifact {name} differs between runs");
        compared += 1;
    }
    assert!(compared > 10, "expected a real artifact set, saw {compared}");
    println!("[PASS] criterion 10: {compared} artifacts byte-identical across reruns");
    let _ = fs::remove_dir_all(&out_a);
    let _ = fs::remove_dir_all(&out_b);
}

#[test]
fn invalid_config_is_exit_2() {
    let out = fresh_dir("invalid");
    let mut cfg = concentration_config(100, &out); // not a power of two
    let err = run_experiment(&cfg, Some(&out)).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INVALID_CONFIG);

    cfg.grid.n = 1024;
    cfg.time.dt = -1.0;
    let err = run_experiment(&cfg, Some(&out)).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_INVALID_CONFIG);
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn sum_initial_data_runs_through_the_characteristic_pipeline() {
    let out = fresh_dir("sum");
    let cfg = ExperimentConfig {
        command: Command::Semilinear,
        initial_data: InitialData::Sum {
            terms: vec![
                InitialData::Gaussian {
                    amp: 0.4,
                    width: 1.0,
                    center: -1.0,
                },
                InitialData::Peakons {
                    pairs: vec![PeakonPair { p: 0.3, q: 1.5 }],
                    smoothing: 0.05,
                },
            ],
        },
        grid: GridConfig { l: 20.0, n: 512 },
        time: TimeConfig {
            t_end: 0.05,
            dt: 1e-3,
        },
        solver: SolverKind::Rk4,
        output_dir: out.clone(),
        seed: 0,
    };
    run_experiment(&cfg, Some(&out)).expect("sum run");
    assert!(out.join("energy_series.csv").exists());
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn semilinear_picard_solver_writes_slices() {
    let out = fresh_dir("picard");
    let cfg = ExperimentConfig {
        command: Command::Semilinear,
        initial_data: InitialData::Gaussian {
            amp: 0.4,
            width: 1.0,
            center: 0.0,
        },
        grid: GridConfig { l: 20.0, n: 256 },
        time: TimeConfig {
            t_end: 0.05,
            dt: 1e-3,
        },
        solver: SolverKind::Picard,
        output_dir: out.clone(),
        seed: 0,
    };
    let summary = run_experiment(&cfg, Some(&out)).expect("picard run");
    // 64 stored slices plus the initial one
    assert_eq!(
        summary.files.iter().filter(|f| f.starts_with("slice_")).count(),
        65
    );
    assert!(out.join("index.json").exists());
    assert!(out.join("energy_series.csv").exists());
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn no_collision_is_exit_4() {
    let out = fresh_dir("no-collision");
    let mut cfg = concentration_config(1024, &out);
    // same-sign well-separated peakons never cross on a short horizon
    cfg.initial_data = InitialData::Peakons {
        pairs: vec![
            PeakonPair { p: 0.4, q: -3.0 },
            PeakonPair { p: 0.5, q: 3.0 },
        ],
        smoothing: 0.0,
    };
    cfg.time.t_end = 0.3;
    let err = run_experiment(&cfg, Some(&out)).unwrap_err();
    assert_eq!(err.exit_code(), EXIT_NO_COLLISION);
    assert!(matches!(err, RunError::NoCollision));
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn smooth_run_reports_conservation() {
    let out = fresh_dir("smooth");
    let cfg = ExperimentConfig {
        command: Command::Smooth,
        initial_data: InitialData::Gaussian {
            amp: 0.5,
            width: 1.0,
            center: 0.0,
        },
        grid: GridConfig { l: 20.0, n: 2048 },
        time: TimeConfig {
            t_end: 0.5,
            dt: 1e-3,
        },
        solver: SolverKind::Rk4,
        output_dir: out.clone(),
        seed: 0,
    };
    run_experiment(&cfg, Some(&out)).expect("smooth run");
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let drift = report["e_relative_drift"].as_f64().unwrap();
    assert!(drift <= 1e-4, "E drift {drift:e}");
    assert!(out.join("series.csv").exists());
    assert!(out.join("manifest.json").exists());
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn blowup_surfaces_as_exit_3_note() {
    // an absurdly large time step makes the smooth solver reject the run;
    // the CFL guard maps to a solver error (exit 1), while genuine blowup
    // in the peakon system maps to exit 3
    let out = fresh_dir("blowup");
    let mut cfg = concentration_config(1024, &out);
    cfg.command = Command::Peakons;
    cfg.initial_data = InitialData::Peakons {
        pairs: vec![
            PeakonPair { p: 60.0, q: -0.2 },
            PeakonPair { p: -60.0, q: 0.2 },
        ],
        smoothing: 0.0,
    };
    cfg.time = TimeConfig {
        t_end: 1.0,
        dt: 0.05,
    };
    match run_experiment(&cfg, Some(&out)) {
        Err(e) => assert_eq!(e.exit_code(), EXIT_BLOWUP, "unexpected error kind: {e}"),
        Ok(_) => {
            // with these amplitudes the guards may halt the run instead of
            // overflowing; either way the trajectory artifact must exist
            assert!(out.join("trajectory.csv").exists());
        }
    }
    let _ = fs::remove_dir_all(&out);
}
