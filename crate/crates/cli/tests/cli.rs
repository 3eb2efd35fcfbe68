use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn htlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, cmd: &str, cfg: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    htlab(&args)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn set20_text() -> String {
    std::fs::read_to_string(config("set20.json")).unwrap()
}

#[test]
fn shipped_configs_parse_and_find_orbits() {
    for set in ["set20", "set21", "set22", "set23"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), "find-orbits", &config(&format!("{set}.json")), &[]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{set}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let table = std::fs::read_to_string(dir.path().join("orbits.csv")).unwrap();
        assert!(table.starts_with("k,period,branch,j,x_j,y_j,trace,det,stability,residual"));
        assert!(dir.path().join("orbit_summary.csv").exists());
    }
}

#[test]
fn check_theory_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "check-theory", &config("set20.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("theory_report.json")).unwrap()).unwrap();
    assert!(report.is_object());
    assert!(dir.path().join("growth.json").exists());

    let cfg = write_config(dir.path(), &set20_text().replace("\"d5\": 1.0", "\"d5\": 0.0"));
    let out = run_in(dir.path(), "check-theory", &cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("d5_nonzero"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write_config(
        dir.path(),
        &set20_text().replace("\"seed\": 1", "\"seed\": 1, \"sead\": 2"),
    );
    let out = run_in(dir.path(), "find-orbits", &bad_key, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sead"));

    let out = run_in(dir.path(), "basins", &config("set20.json"), &["--resolution", "1x1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(dir.path(), "basins", &config("set20.json"), &["--resolution", "wide"]);
    assert_eq!(out.status.code(), Some(2));

    let bad_lambda = write_config(dir.path(), &set20_text().replace("\"lambda\": 0.8", "\"lambda\": 1.2"));
    assert_eq!(
        run_in(dir.path(), "find-orbits", &bad_lambda, &[]).status.code(),
        Some(2)
    );

    assert_eq!(
        run_in(dir.path(), "find-orbits", &dir.path().join("absent.json"), &[])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn missing_registry_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_orbits.csv");
    let text = set20_text().replace(
        "\"registry\": \"auto\"",
        &format!("\"registry\": {:?}", missing.to_str().unwrap()),
    );
    let cfg = write_config(dir.path(), &text);
    let out = run_in(dir.path(), "basins", &cfg, &["--resolution", "8x8"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn basins_from_orbit_table_matches_auto_registry() {
    let dir = tempfile::tempdir().unwrap();
    let orbits = dir.path().join("orbits");
    assert_eq!(
        run_in(&orbits, "find-orbits", &config("set20.json"), &[]).status.code(),
        Some(0)
    );
    let table = orbits.join("orbits.csv");
    let text = set20_text().replace(
        "\"registry\": \"auto\"",
        &format!("\"registry\": {:?}", table.to_str().unwrap()),
    );
    let cfg = write_config(dir.path(), &text);

    let from_table = dir.path().join("table");
    let auto = dir.path().join("auto");
    assert_eq!(
        run_in(&from_table, "basins", &cfg, &["--resolution", "30x30"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run_in(&auto, "basins", &config("set20.json"), &["--resolution", "30x30"])
            .status
            .code(),
        Some(0)
    );
    let a = std::fs::read(from_table.join("basins.ppm")).unwrap();
    let b = std::fs::read(auto.join("basins.ppm")).unwrap();
    assert!(a.starts_with(b"P6\n30 30\n255\n"));
    assert_eq!(a, b);
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    for cmd in ["find-orbits", "manifolds", "basins"] {
        assert_eq!(
            run_in(
                &one,
                cmd,
                &config("set23.json"),
                &["--threads", "1", "--resolution", "40x40"]
            )
            .status
            .code(),
            Some(0)
        );
        assert_eq!(
            run_in(
                &four,
                cmd,
                &config("set23.json"),
                &["--threads", "4", "--resolution", "40x40"]
            )
            .status
            .code(),
            Some(0)
        );
    }
    for file in [
        "orbits.csv",
        "orbit_summary.csv",
        "unstable.csv",
        "stable.csv",
        "tangencies.csv",
        "basins.ppm",
        "basin_stats.csv",
        "basin_legend.csv",
    ] {
        let a = std::fs::read(one.join(file)).unwrap();
        let b = std::fs::read(four.join(file)).unwrap();
        assert!(a == b, "{file} differs between thread counts");
    }
}

#[test]
fn manifolds_report_the_tangency() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "manifolds", &config("set20.json"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let hits = std::fs::read_to_string(dir.path().join("tangencies.csv")).unwrap();
    let found = hits.lines().skip(1).any(|l| {
        let f: Vec<&str> = l.split(',').collect();
        let x: f64 = f[0].parse().unwrap();
        f[2] == "Tangential" && (x - 1.0).abs() < 1e-8
    });
    assert!(found, "no tangential contact at (1, 0):\n{hits}");
}
