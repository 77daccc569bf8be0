use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pursuit_cli::analyze::{read_report, IC_REPORT_FILE};
use pursuit_cli::eval::{SUCCESS_FILE, SUCCESS_HEADER};
use pursuit_cli::tables::{agent_id, TableWriter, TrajectoryRow, TRAJECTORY_HEADER};
use pursuit_cli::train::CURVE_FILE;
use pursuit_cli::ExperimentConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pursuit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pursuit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A few short epochs of the smoke setup.
fn tiny_config(dir: &Path, seed: u64) -> PathBuf {
    let smoke = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke_cd_ddpg.json");
    let mut c = ExperimentConfig::load(&smoke).unwrap();
    c.env.episode_length = 25;
    c.curriculum.plan.sessions[0].epochs = 6;
    c.curriculum.plan.warmup_epochs = 2;
    c.run.checkpoint_every = 2;
    c.run.seed = seed;
    let path = dir.join(format!("tiny_{seed}.json"));
    std::fs::write(&path, c.to_json().unwrap()).unwrap();
    path
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), 3);
    let whole = tmp.path().join("whole");
    let split = tmp.path().join("split");

    let o = pursuit(&["--config", s(&cfg), "--out", s(&whole), "train"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = pursuit(&["--config", s(&cfg), "--out", s(&split), "train", "--stop-after", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("stopped"));
    let ckpt = split.join("checkpoint.json");
    let o = pursuit(&["--config", s(&cfg), "--out", s(&split), "train", "--resume", s(&ckpt)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let a = std::fs::read(whole.join(CURVE_FILE)).unwrap();
    let b = std::fs::read(split.join(CURVE_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resume_rejects_checkpoint_from_other_config() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tiny_config(tmp.path(), 3);
    let other = tiny_config(tmp.path(), 4);
    let out = tmp.path().join("run");
    let o = pursuit(&["--config", s(&first), "--out", s(&out), "train", "--stop-after", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let ckpt = out.join("checkpoint.json");
    let o = pursuit(&["--config", s(&other), "--out", s(&out), "train", "--resume", s(&ckpt)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("digest"), "{}", stderr(&o));
}

#[test]
fn eval_writes_success_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("eval");
    let o = pursuit(&[
        "--out", s(&out), "eval", "--strategy", "greedy", "--ratios", "0.8,1.2", "--episodes", "5",
        "--eval-seeds", "0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join(SUCCESS_FILE)).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "#schema_version=1");
    assert_eq!(lines[1], SUCCESS_HEADER);
    assert_eq!(lines.len(), 4);
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(fields[0], "greedy");
    assert_eq!(fields[1].parse::<f64>().unwrap(), 0.8);
    assert_eq!(fields[2], "5");
}

#[test]
fn eval_rejects_unknown_strategy() {
    let o = pursuit(&["eval", "--strategy", "telepathy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("telepathy"));
}

/// Two pursuers over `steps` steps, where the second pursuer's action is
/// produced by `follow` from the first pursuer's previous action.
fn write_log(path: &Path, steps: u64, follow: impl Fn(f64, &mut ChaCha8Rng) -> f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut w = TableWriter::create(path, TRAJECTORY_HEADER).unwrap();
    let row = |step: u64, agent: String, action: f64| TrajectoryRow {
        episode: 0,
        step,
        agent,
        x: 0.25,
        y: 0.5,
        heading: action,
        action,
        reward: 0.0,
        captured: 0,
        ratio: 0.8,
    };
    let mut previous = 0.0;
    for step in 0..steps {
        let lead = rng.random_range(-PI..PI);
        let second = follow(previous, &mut rng);
        previous = lead;
        w.row(row(step, agent_id(0), lead).fields()).unwrap();
        w.row(row(step, agent_id(1), second).fields()).unwrap();
        w.row(row(step, "e".into(), 0.0).fields()).unwrap();
    }
    w.finish().unwrap();
}

fn analyzed_mi(follow: impl Fn(f64, &mut ChaCha8Rng) -> f64) -> f64 {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("log.csv");
    write_log(&log, 20_000, follow);
    let out = tmp.path().join("analysis");
    let o = pursuit(&["--out", s(&out), "analyze", "--trajectories", s(&log)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_report(&out.join(IC_REPORT_FILE)).unwrap();
    assert_eq!(report.ratios.len(), 1);
    let pairs = &report.ratios[0].coordination.pairs;
    pairs.iter().find(|p| p.from == 0 && p.to == 1).unwrap().mi_bits
}

#[test]
fn analyze_separates_copycat_from_independent_actions() {
    let copy = analyzed_mi(|lead, _| lead);
    let indep = analyzed_mi(|_, rng| rng.random_range(-PI..PI));
    assert!(copy > 3.9, "{copy}");
    assert!(indep < 0.05, "{indep}");
}

#[test]
fn analyze_reports_line_of_malformed_row() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("log.csv");
    write_log(&log, 4, |lead, _| lead);
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<&str> = lines[6].split(',').collect();
    fields[3] = "abc";
    lines[6] = fields.join(",");
    std::fs::write(&log, lines.join("\n") + "\n").unwrap();

    let o = pursuit(&["--out", s(&tmp.path().join("a")), "analyze", "--trajectories", s(&log)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn analyze_rejects_wrong_schema_version() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("log.csv");
    std::fs::write(&log, format!("#schema_version=9\n{TRAJECTORY_HEADER}\n")).unwrap();
    let o = pursuit(&["--out", s(&tmp.path().join("a")), "analyze", "--trajectories", s(&log)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("schema version"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"env": {"n_pursuers": "three"}}"#).unwrap();
    let o = pursuit(&["--config", s(&cfg), "evader-check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("env.n_pursuers"), "{}", stderr(&o));
}

#[test]
fn checks_exit_cleanly() {
    let o = pursuit(&["evader-check"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);

    let o = pursuit(&["selfcheck"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
