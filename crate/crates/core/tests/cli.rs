use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mvlpe");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MVLPE_THREADS").output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_inputs(dir: &Path) {
    fs::write(
        dir.join("spec.json"),
        r#"{"n_per_class": 12, "n_classes": 2, "seed": 3,
            "views": [{"dim": 5, "noise_sigma": 0.0}, {"dim": 4, "noise_sigma": 0.8}]}"#,
    )
    .unwrap();
    fs::write(
        dir.join("cfg.json"),
        r#"{"d_star": 2, "max_outer_iters": 8, "on_objective_increase": "warn", "repeats": 3}"#,
    )
    .unwrap();
}

#[test]
fn synth_fit_trace_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_inputs(d);
    let data = d.join("data");
    assert!(run(&["synth", "--spec", s(&d.join("spec.json")), "--out", s(&data)]).status.success());

    let model = d.join("model.json");
    let out = run(&["fit", "--data", s(&data), "--config", s(&d.join("cfg.json")), "--out", s(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = d.join("trace.csv");
    assert!(run(&["trace", "--model", s(&model), "--out", s(&trace)]).status.success());
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,objective,disagreement_v1,disagreement_v2"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].parse::<usize>().unwrap(), i + 1);
        assert!(cells[1..].iter().all(|c| c.parse::<f64>().unwrap().is_finite()));
    }

    let report = d.join("report.csv");
    let out = run(&["eval", "--data", s(&data), "--config", s(&d.join("cfg.json")), "--method", "cle", "--out", s(&report)]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.starts_with("MEAN=") && stdout.contains(" MAX="), "{stdout}");
    assert_eq!(fs::read_to_string(&report).unwrap().lines().count(), 4);
}

#[test]
fn out_of_range_fraction_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let res = run(&["eval", "--data", "nowhere", "--fraction", "1.5", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn zero_threads_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let res = run(&["--threads", "0", "synth", "--spec", "x", "--out", s(&dir.path().join("d"))]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn repeated_fits_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_inputs(d);
    let data = d.join("data");
    assert!(run(&["synth", "--spec", s(&d.join("spec.json")), "--out", s(&data)]).status.success());
    let a = d.join("a.json");
    let b = d.join("b.json");
    for m in [&a, &b] {
        assert!(run(&["fit", "--data", s(&data), "--config", s(&d.join("cfg.json")), "--out", s(m)]).status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
