use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tracelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tracelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: [&str; 6] = ["--set", "network.n=40", "--set", "run.horizon=15", "--reps", "3"];

#[test]
fn generate_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("ring.txt");
    let o = tracelab(&["generate", "--ws", "300", "4", "0", "--out", path(&file)]);
    assert!(o.status.success(), "{o:?}");
    let o = tracelab(&["metrics", path(&file)]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("nodes\t300"), "{text}");
    assert!(text.contains("edges\t600"), "{text}");
    assert!(text.contains("gamma_c\t0.5"), "{text}");
    assert!(text.contains("components\t1"), "{text}");
}

#[test]
fn generate_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (f, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = tracelab(&["generate", "--sf", "200", "2.5", "--seed", seed, "--out", path(f)]);
        assert!(o.status.success(), "{o:?}");
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut args = vec!["run", "--set", "policy.name=rbex", "--out", path(&out)];
    args.extend(SMALL);
    let o = tracelab(&args);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("runs.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("policy,rep,seed,day,budget,selected,positives,cumulative,err,active,infectious")
    );
    assert_eq!(lines.count(), 3 * 15);
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"config_hash\""));
    assert!(summary.contains("mean_final_cumulative.rbex"));
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("network.n = 40"), "{config}");
}

#[test]
fn run_is_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(jobs);
        let mut args = vec!["compare", "--jobs", jobs, "--out", path(&out)];
        args.extend(SMALL);
        let o = tracelab(&args);
        assert!(o.status.success(), "{o:?}");
        csvs.push(fs::read(out.join("runs.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn compare_reports_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let mut args = vec!["compare", "--policies", "rbex,reer,none", "--out", path(&out)];
    args.extend(SMALL);
    let o = tracelab(&args);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("Ratio = "));
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"ratio\""));
    assert!(summary.contains("\"delta_err\""));
}

#[test]
fn set_overrides_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.txt");
    fs::write(&cfg, "# small run\nnetwork.n = 30\nrun.horizon = 12\nrun.reps = 2\nmodel.beta = 0.3\n").unwrap();
    let out = dir.path().join("o");
    let o = tracelab(&["run", "--config", path(&cfg), "--set", "model.beta=0.2", "--out", path(&out)]);
    assert!(o.status.success(), "{o:?}");
    let config = fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(config.contains("model.beta = 0.2"), "{config}");
    assert!(config.contains("network.n = 30"), "{config}");
}

#[test]
fn unknown_scenario_exits_one() {
    let o = tracelab(&["reproduce", "table9"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("theorem2"), "{err}");
}

#[test]
fn unknown_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracelab(&["run", "--set", "model.bogus=1", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.bogus"));
}

#[test]
fn invalid_value_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracelab(&["run", "--set", "model.beta=1.5", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_files_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    assert_eq!(tracelab(&["metrics", path(&missing)]).status.code(), Some(3));
    let o = tracelab(&["run", "--config", path(&missing), "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn line_recovery_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tracelab(&["reproduce", "theorem2", "--n", "10", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(dir.path().join("theorem2.csv").exists());
}
