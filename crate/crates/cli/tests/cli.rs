use std::path::Path;
use std::process::{Command, Output};

use srm::record::Table;

fn srm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srm"))
        .args(args)
        .current_dir(dir)
        .env_remove("SRM_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn record_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(" = "))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn bad_input_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve", "--c", "0"][..],
        &["solve"],
        &["reproduce", "9x"],
        &["solve", "--c", "1", "--spectrum", "1.5"],
        &["sweep", "--grid", "1,1"],
        &["--jobs", "0", "solve", "--c", "1"],
    ] {
        let out = srm(dir.path(), args);
        assert_eq!(
            out.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = srm(dir.path(), &["reproduce", "9x"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1a"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.toml"), "[solve]\nsgima2 = 0.1\n").unwrap();
    let out = srm(dir.path(), &["--config", "cfg.toml", "solve", "--c", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sgima2"));
}

#[test]
fn solve_matches_gaussian_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let (c, s2) = (0.7f64, 0.3f64);
    let out = srm(
        dir.path(),
        &[
            "solve",
            "--c",
            "0.7",
            "--sigma2",
            "0.3",
            "--prior",
            "gaussian(1)",
        ],
    );
    assert!(out.status.success());
    let b = s2 + c - 1.0;
    let root = (-b + (b * b + 4.0 * s2).sqrt()) / 2.0;
    let text = stdout(&out);
    assert!((record_value(&text, "r2_1") - root).abs() < 1e-10, "{text}");
    assert!(
        (record_value(&text, "r1_1") - c / (s2 + root)).abs() < 1e-8,
        "{text}"
    );
}

#[test]
fn config_file_supplies_missing_options() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "[solve]\nc = 0.7\nsigma2 = 0.3\nprior = \"gaussian(1)\"\n",
    )
    .unwrap();
    let from_file = stdout(&srm(dir.path(), &["--config", "cfg.toml", "solve"]));
    let direct = stdout(&srm(
        dir.path(),
        &[
            "solve",
            "--c",
            "0.7",
            "--sigma2",
            "0.3",
            "--prior",
            "gaussian(1)",
        ],
    ));
    assert_eq!(from_file, direct);
    let overridden = stdout(&srm(
        dir.path(),
        &["--config", "cfg.toml", "solve", "--c", "2"],
    ));
    assert_eq!(record_value(&overridden, "c"), 2.0);
}

#[test]
fn gaussian_sweep_is_monotone_in_c() {
    let dir = tempfile::tempdir().unwrap();
    let out = srm(
        dir.path(),
        &[
            "sweep",
            "--prior",
            "gaussian(1)",
            "--grid",
            "0.2:2:0.2",
            "--output",
            "s.csv",
        ],
    );
    assert!(out.status.success());
    let table = Table::parse(&std::fs::read_to_string(dir.path().join("s.csv")).unwrap()).unwrap();
    assert_eq!(table.meta("axis"), Some("c"));
    assert!(table.meta("config_hash").is_some());
    let mmse = table.column_f64("mmse_total").unwrap();
    assert_eq!(mmse.len(), 10);
    assert!(mmse.windows(2).all(|w| w[1] < w[0]), "{mmse:?}");
    assert!(table
        .column_str("status")
        .unwrap()
        .iter()
        .all(|s| *s == "ok"));
}

#[test]
fn simulate_is_deterministic_and_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--spectrum",
        "0.5",
        "--grid",
        "0.5,1.5",
        "--p",
        "64",
        "--trials",
        "1",
        "--seed",
        "7",
    ];
    let run = |name: &str| {
        let mut a = args.to_vec();
        a.extend(["--output", name]);
        let out = srm(dir.path(), &a);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));

    // The CSV carries its own config.
    let out = srm(
        dir.path(),
        &["--config", "a.csv", "simulate", "--output", "c.csv"],
    );
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(dir.path().join("c.csv")).unwrap());

    let other = {
        let mut a = args.to_vec();
        *a.last_mut().unwrap() = "8";
        a.extend(["--output", "d.csv"]);
        assert!(srm(dir.path(), &a).status.success());
        std::fs::read(dir.path().join("d.csv")).unwrap()
    };
    assert_ne!(first, other);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_srm"))
        .args(["sweep", "--grid", "0.5,1"])
        .current_dir(dir.path())
        .env("SRM_OUTPUT_DIR", "results/run1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(dir.path().join("results/run1/sweep.csv").exists());
}

#[test]
fn figure_redraw_from_csv_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = srm(
        dir.path(),
        &[
            "--output-dir",
            "figs",
            "reproduce",
            "2b",
            "--p",
            "32",
            "--trials",
            "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let svg = std::fs::read(dir.path().join("figs/fig2b.svg")).unwrap();
    assert!(String::from_utf8_lossy(&svg).starts_with("<svg"));

    let out = srm(
        dir.path(),
        &[
            "--output-dir",
            "redraw",
            "reproduce",
            "--from-csv",
            "figs/fig2b.csv",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        svg,
        std::fs::read(dir.path().join("redraw/fig2b.svg")).unwrap()
    );
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = srm(dir.path(), &["selftest"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}
