//! The `drmdp` binary: subcommands, flags, shipped configs and error paths.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn drmdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drmdp")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn shipped(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn csv_lines(path: PathBuf) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn shipped_configs_validate() {
    for (name, target, expect) in [
        ("gridworld_ope.json", "ope", "25 states, 4 actions"),
        ("two_state_ope.json", "ope", "2 states, 2 actions"),
        ("machine_replacement_opt.json", "optimize", "10 states, 2 actions"),
        ("ldp_two_state.json", "ldp-check", "2 states, 1 actions"),
    ] {
        let out = drmdp(&["validate-config", "--config", &shipped(name), "--target", target]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains(expect), "{name}: {}", stdout(&out));
    }
}

#[test]
fn invalid_configs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    for (i, doc) in [
        r#"{"T": [1]}"#,
        r#"{"radii": {"grid": [-0.1]}}"#,
        r#"{"mdp": {"file": "missing.json"}}"#,
        r#"{"colour": "blue"}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let path = dir.path().join(format!("bad{i}.json"));
        std::fs::write(&path, doc).unwrap();
        let out = drmdp(&["validate-config", "--config", &path.display().to_string()]);
        assert!(!out.status.success(), "{doc}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{doc}");
    }
}

#[test]
fn reducible_mdp_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("mdp.json");
    std::fs::write(&mdp, r#"{"kernel": [[[1.0, 0.0]], [[0.0, 1.0]]], "reward": [[1.0], [0.0]]}"#).unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"mdp": {"file": "mdp.json"}}"#).unwrap();
    let out = drmdp(&["validate-config", "--config", &cfg.display().to_string()]);
    assert!(!out.status.success());
}

#[test]
fn simulate_writes_versioned_one_based_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = drmdp(&["simulate", "--out", &out_dir.display().to_string(), "--seeds", "4,9", "--T", "50"]);
    assert!(out.status.success());
    for seed in [4, 9] {
        let lines = csv_lines(out_dir.join(format!("trajectory_T50_seed{seed}.csv")));
        assert_eq!(lines[0], "# schema=1");
        assert_eq!(lines[1], "t,state,action");
        assert_eq!(lines.len(), 52);
        for (k, line) in lines[2..].iter().enumerate() {
            let f: Vec<usize> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(f[0], k + 1);
            assert!((1..=25).contains(&f[1]) && (1..=4).contains(&f[2]));
        }
    }
}

#[test]
fn ope_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ope");
    let out = drmdp(&[
        "ope",
        "--config",
        &shipped("two_state_ope.json"),
        "--out",
        &out_dir.display().to_string(),
        "--seeds",
        "2",
        "--T",
        "400",
        "--radius-grid",
        "0.01,0.03",
        "--threads",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(out_dir.join("ope_results.csv"));
    assert_eq!(lines[0], "# schema=1");
    assert_eq!(lines[1], "estimator,T,hyper,seed,estimate,true_value,disappointed,smoothed");
    // Two seeds, each with the plug-in row and two robust rows.
    assert_eq!(lines.len(), 2 + 2 * 3);
    for line in &lines[2..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], "400");
        let (estimate, truth): (f64, f64) = (f[4].parse().unwrap(), f[5].parse().unwrap());
        assert_eq!(f[6] == "true", truth < estimate);
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["dominance_violations"], 0);
    assert!(stdout(&out).contains("true value"));
}

#[test]
fn ldp_check_on_the_whole_space_has_zero_rate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ldp.json");
    std::fs::write(
        &cfg,
        r#"{"T": [50], "seeds": {"count": 20},
            "ldp": {"event": {"box": {"lower": [0, 0, 0, 0], "upper": [1, 1, 1, 1]}}}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("ldp");
    let out = drmdp(&["ldp-check", "--config", &cfg.display().to_string(), "--out", &out_dir.display().to_string()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(out_dir.join("ldp_results.csv"));
    assert_eq!(lines[1], "T,hits,trials,rate_est,ci_lo,ci_hi,rate_lb,rate_ub");
    let f: Vec<&str> = lines[2].split(',').collect();
    assert_eq!((f[1], f[2]), ("20", "20"));
    assert_eq!(f[3].parse::<f64>().unwrap(), 0.0);
    // The grid infimum is off by the distance from ξ₀ to the nearest grid point.
    assert!(f[7].parse::<f64>().unwrap().abs() < 1e-4);
    assert!(stdout(&out).contains("inside"));
}

#[test]
fn optimize_writes_frequencies_that_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("opt.json");
    std::fs::write(
        &cfg,
        r#"{"T": [100, 200], "seeds": {"count": 2},
            "actor": {"iterations": 3, "critic_iterations": 20}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("opt");
    let out = drmdp(&["optimize", "--config", &cfg.display().to_string(), "--out", &out_dir.display().to_string()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = csv_lines(out_dir.join("opt_results.csv"));
    assert_eq!(lines[1], "T,estimator,win_freq");
    for len in ["100", "200"] {
        let total: f64 = lines[2..]
            .iter()
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[0] == len)
            .map(|f| f[2].parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }
    assert!(out_dir.join("opt_runs.csv").exists());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = drmdp(&["evaluate"]);
    assert!(!out.status.success());
    assert!(drmdp(&["--help"]).status.success());
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out_dir = dir.path().join(format!("ope_{threads}"));
        let out = drmdp(&[
            "ope",
            "--config",
            &shipped("two_state_ope.json"),
            "--out",
            &out_dir.display().to_string(),
            "--seeds",
            "4",
            "--T",
            "300",
            "--threads",
            threads,
        ]);
        assert!(out.status.success());
        std::fs::read(out_dir.join("ope_results.csv")).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}
