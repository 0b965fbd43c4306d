use std::path::Path;
use std::process::{Command, Output};

use admmpb::bench::{ExperimentConfig, IndicatorReport};
use admmpb::io::read_json;

fn admmpb(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_admmpb"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(admmpb(dir.path(), &["--help"]).status.code(), Some(0));
    let v = admmpb(dir.path(), &["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains(admmpb::VERSION));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--bogus", "selftest"][..],
        &[][..],
        &["train-baseline", "--omega", "abc"][..],
        &["frobnicate"][..],
    ] {
        let out = admmpb(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"), "{args:?}");
    }
    assert!(entries(dir.path()).is_empty());
}

#[test]
fn compare_without_reports_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = admmpb(dir.path(), &["compare"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing reports"));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = admmpb(dir.path(), &["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("selftest passed"));
    assert!(entries(dir.path()).is_empty());
}

#[test]
fn bad_config_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), "{\"horizon\": 0}").unwrap();
    let out = admmpb(dir.path(), &["--config", "c.json", "train-admm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid configuration"));
}

#[test]
fn full_pipeline_writes_only_under_out() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    // small custom run through a config file
    let mut cfg = ExperimentConfig::default().desk_scale();
    cfg.admm.max_iters = 4;
    cfg.baseline.epochs = 6;
    cfg.baseline.omegas = vec![1.0, 1e5];
    cfg.horizon = 30;
    std::fs::write(cwd.join("cfg.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    let common = ["--config", "cfg.json", "--out", "res", "--seed", "3", "--threads", "1"];
    let run = |extra: &[&str]| {
        let args: Vec<&str> = common.iter().chain(extra).copied().collect();
        let out = admmpb(cwd, &args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{extra:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };
    run(&["train-admm", "--checkpoint-every", "2"]);
    run(&["train-baseline"]);
    let table = run(&["compare"]);
    assert!(String::from_utf8_lossy(&table.stdout).contains("ADMM-PB"));
    run(&[
        "eval",
        "--checkpoint",
        "res/admm/checkpoint.bin",
        "--trace",
        "res/admm/loss_trace.csv",
    ]);

    assert_eq!(entries(cwd), ["cfg.json", "res"]);
    let res = cwd.join("res");
    assert_eq!(entries(&res), ["admm", "baseline", "config.json", "eval", "table3.csv"]);
    assert_eq!(
        entries(&res.join("admm")),
        [
            "checkpoint.bin",
            "checkpoint_1.bin",
            "checkpoint_3.bin",
            "indicators.json",
            "iterates.csv",
            "loss_trace.csv",
            "test_trajectories.csv"
        ]
    );
    assert_eq!(entries(&res.join("baseline")), ["omega_1", "omega_100000"]);

    let resolved: ExperimentConfig = read_json(&res.join("config.json")).unwrap();
    assert_eq!(resolved, cfg.clone().with_seed(3));

    let admm: IndicatorReport = read_json(&res.join("admm/indicators.json")).unwrap();
    let eval: IndicatorReport = read_json(&res.join("eval/indicators.json")).unwrap();
    assert_eq!(admm.violation, eval.violation);
    assert_eq!(admm.lq_mean, eval.lq_mean);
    assert_eq!(admm.delta_loss, eval.delta_loss);
    assert_eq!(admm.seed, 3);
    assert_eq!(admm.version, admmpb::VERSION);

    let csv = std::fs::read_to_string(res.join("table3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("method,dL_x1e5,L_LQ,L_ca,V,V_x_L_LQ"));
    assert_eq!(lines.count(), 3);

    let iterates = std::fs::read_to_string(res.join("admm/iterates.csv")).unwrap();
    assert_eq!(iterates.lines().count(), 5);
    let traj = std::fs::read_to_string(res.join("admm/test_trajectories.csv")).unwrap();
    assert!(traj.starts_with("t,s,x1,x2,x3,x4,u1,u2,w1,w2,w3,w4\n"));
    assert_eq!(traj.lines().count(), 1 + 5 * 31);
}

#[test]
fn eval_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cwd = dir.path();
    let mut cfg = ExperimentConfig::default().desk_scale();
    cfg.admm.max_iters = 1;
    cfg.horizon = 10;
    std::fs::write(cwd.join("a.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    cfg.operator.kappa = 0.9;
    std::fs::write(cwd.join("b.json"), serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(
        admmpb(cwd, &["--config", "a.json", "train-admm"]).status.code(),
        Some(0)
    );
    let out = admmpb(
        cwd,
        &["--config", "b.json", "eval", "--checkpoint", "out/admm/checkpoint.bin"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn seeded_desk_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = admmpb(dir.path(), &["train-admm", "--desk-scale", "--seed", "7", "--out", out]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = std::fs::read(dir.path().join("a/admm/indicators.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/admm/indicators.json")).unwrap();
    assert_eq!(a, b);
}
