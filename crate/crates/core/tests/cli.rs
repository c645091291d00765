use std::path::Path;
use std::process::{Command, Output};

use partppo::cli::{EVAL_HEADER, EXIT_IO, EXIT_USAGE};
use partppo::explain::load_heatmaps;
use partppo::logio::{parse_report_csv, read_log};
use partppo::nncore::Mlp;
use partppo::ppo::{Checkpoint, RunConfig};

fn partppo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_partppo"))
        .args(args)
        .env_remove("PARTPPO_SEED")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn train(out: &Path, method: &str, seeds: &str) {
    let o = partppo(&[
        "train",
        "--method",
        method,
        "--seeds",
        seeds,
        "--episodes",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn zero_checkpoint(path: &Path) {
    Checkpoint {
        method: "asga-exp".into(),
        seed: 0,
        episode: 0,
        config: RunConfig::default(),
        actor: Mlp::actor(),
        critic: Mlp::critic(),
    }
    .save(path)
    .unwrap();
}

#[test]
fn train_writes_the_run_layout() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path(), "asga-exp", "1");
    let run = dir.path().join("asga-exp/seed-1");
    let ck = Checkpoint::load(&run.join("checkpoint.txt")).unwrap();
    assert_eq!(
        (ck.method.as_str(), ck.seed, ck.episode),
        ("asga-exp", 1, 2)
    );
    let log = read_log(&run.join("log.csv")).unwrap();
    assert_eq!(log.records.len(), 2);
    assert_eq!(log.meta.method, "asga-exp");
}

#[test]
fn seed_defaults_to_environment_variable() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_partppo"))
        .args([
            "train",
            "--method",
            "csga-xavier",
            "--episodes",
            "1",
            "--out",
        ])
        .arg(dir.path())
        .env("PARTPPO_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(dir
        .path()
        .join("csga-xavier/seed-42/checkpoint.txt")
        .exists());
}

#[test]
fn config_file_is_applied_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "gamma = 0.9\nactor_lr = 0.5\nmax_steps = 50\n").unwrap();
    let o = partppo(&[
        "train",
        "--method",
        "asga-exp",
        "--seeds",
        "1",
        "--episodes",
        "1",
        "--actor-lr",
        "0.2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ck = Checkpoint::load(&dir.path().join("asga-exp/seed-1/checkpoint.txt")).unwrap();
    assert_eq!(ck.config.ppo.gamma, 0.9);
    assert_eq!(ck.config.ppo.actor_lr, 0.2);
    assert_eq!(ck.config.env.max_steps, 50);

    std::fs::write(&cfg, "gamma = 2\n").unwrap();
    let o = partppo(&[
        "train",
        "--method",
        "asga-exp",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), EXIT_USAGE);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&partppo(&["train", "--method", "nope"])), EXIT_USAGE);
    assert_eq!(code(&partppo(&["bogus"])), EXIT_USAGE);
    assert_eq!(
        code(&partppo(&[
            "train",
            "--method",
            "asga-exp",
            "--workers",
            "0"
        ])),
        EXIT_USAGE
    );
}

#[test]
fn zero_weight_checkpoint_evaluates_like_chance() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("zero.txt");
    zero_checkpoint(&ck);
    let ck = ck.to_str().unwrap();
    let o = partppo(&[
        "eval",
        "--checkpoint",
        ck,
        "--episodes",
        "100",
        "--seed",
        "3",
    ]);
    assert_eq!(code(&o), 0);
    let again = partppo(&[
        "eval",
        "--checkpoint",
        ck,
        "--episodes",
        "100",
        "--seed",
        "3",
    ]);
    assert_eq!(o.stdout, again.stdout);

    let text = std::fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], EVAL_HEADER);
    assert_eq!(lines.len(), 3);
    let mean: f64 = lines[1].split(',').nth(3).unwrap().parse().unwrap();
    assert!(mean > 1.0 && mean < 60.0, "mean {mean}");

    assert_eq!(
        code(&partppo(&["eval", "--checkpoint", ck, "--episodes", "0"])),
        EXIT_USAGE
    );
}

#[test]
fn corrupt_or_missing_checkpoint_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "format = 1\n[actor]\nsizes = 4 2\n").unwrap();
    let o = partppo(&["eval", "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_IO);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.txt"));
    let missing = dir.path().join("missing.txt");
    assert_eq!(
        code(&partppo(&[
            "eval",
            "--checkpoint",
            missing.to_str().unwrap()
        ])),
        EXIT_IO
    );
}

#[test]
fn compare_reports_methods_in_table_order() {
    let dir = tempfile::tempdir().unwrap();
    for m in ["asga-exp", "csga-xavier", "csga-kaiming"] {
        train(dir.path(), m, "1,2");
    }
    let out = dir.path().to_str().unwrap();
    let o = partppo(&[
        "compare",
        "--out",
        out,
        "--seeds",
        "1,2",
        "--eval-episodes",
        "2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    let report = parse_report_csv("compare.csv", &text).unwrap();
    let names: Vec<&str> = report.rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(names, ["csga-kaiming", "csga-xavier", "asga-exp"]);
    assert!(report.rows.iter().all(|r| r.runs == 2));

    assert_eq!(
        code(&partppo(&["compare", "--out", out, "--seeds", "1"])),
        EXIT_USAGE
    );
    let o = partppo(&["compare", "--out", out, "--seeds", "1,3"]);
    assert_eq!(code(&o), EXIT_IO);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed-3"));
}

#[test]
fn explain_scenarios_share_weight_panels() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path(), "asga-exp", "1");
    let ck = dir.path().join("asga-exp/seed-1/checkpoint.txt");
    let ck = ck.to_str().unwrap();
    let mut panels = Vec::new();
    for scenario in ["front-fall", "rear-fall"] {
        let out = dir.path().join(scenario);
        let o = partppo(&[
            "explain",
            "--checkpoint",
            ck,
            "--scenario",
            scenario,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        panels.push(load_heatmaps(&out).unwrap());
    }
    assert_eq!(panels[0].len(), 8);
    assert_eq!(panels[0][0].1.data()[2], 0.9);
    assert_eq!(panels[1][0].1.data()[2], 0.1);
    assert_eq!(panels[0][1..4], panels[1][1..4]);

    let out = dir.path().join("mid");
    let o = partppo(&[
        "explain",
        "--checkpoint",
        ck,
        "--obs",
        "0.5,0.5,0.5,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        code(&partppo(&[
            "explain",
            "--checkpoint",
            ck,
            "--obs",
            "0.5,1.5,0.5,0.5"
        ])),
        EXIT_USAGE
    );
    assert_eq!(code(&partppo(&["explain", "--checkpoint", ck])), EXIT_USAGE);
}

#[test]
fn optimize_input_validates_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    train(dir.path(), "asga-exp", "1");
    let ck = dir.path().join("asga-exp/seed-1/checkpoint.txt");
    let ck = ck.to_str().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = partppo(&[
            "optimize-input",
            "--checkpoint",
            ck,
            "--action",
            "forward",
            "--init",
            "gaussian",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        files.push(std::fs::read(out.join("input_opt.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(String::from_utf8_lossy(&files[0]).lines().count(), 7);

    assert_eq!(
        code(&partppo(&[
            "optimize-input",
            "--checkpoint",
            ck,
            "--action",
            "up"
        ])),
        EXIT_USAGE
    );
    assert_eq!(
        code(&partppo(&[
            "optimize-input",
            "--checkpoint",
            ck,
            "--action",
            "backward",
            "--epochs",
            "0"
        ])),
        EXIT_USAGE
    );
}
