use std::process::Command;

fn bvmlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bvmlab"))
}

const SMALL: [&str; 10] = [
    "--n",
    "300",
    "--draws",
    "100",
    "--fresh-draws",
    "100",
    "--reps",
    "3",
    "--seed",
    "7",
];

#[test]
fn writes_seed_stamped_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = |fmt: &str| {
        let out = bvmlab()
            .arg("indep-l2")
            .args(SMALL)
            .args(["--format", fmt, "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stderr).unwrap()
    };
    let first = run("csv");
    let csv = std::fs::read_to_string(dir.path().join("independence_l2.csv")).unwrap();
    assert!(csv.starts_with("# schema_version=1,experiment=independence_l2,seed=7\n"));
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("n,gamma,replications,"));
    // Same config and seed give byte-identical output.
    assert_eq!(first, run("csv"));
    run("json");
    let json = std::fs::read_to_string(dir.path().join("independence_l2.json")).unwrap();
    assert!(json.trim_start().starts_with('{') && json.contains("\"seed\": 7"));
}

#[test]
fn prints_to_stdout_without_out_dir() {
    let out = bvmlab().arg("oversmooth").args(SMALL).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# schema_version=1,experiment=oversmoothing_demo,seed=7"));
}

#[test]
fn config_errors_exit_with_2() {
    for bad in [
        vec!["coverage", "--gamma", "1.5"],
        vec!["coverage", "--n", "abc"],
        vec!["coverage", "--prior", "nonsense"],
        vec!["coverage", "--format", "xml"],
        vec!["coverage", "--draws", "5"],
        vec!["coverage", "--bogus-flag"],
        vec!["not-an-experiment"],
    ] {
        let out = bvmlab().args(&bad).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(2),
            "{bad:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(
        &cfg,
        "# small run\nn = 300\ndraws = 100\nreps = 2\nseed = 11\n",
    )
    .unwrap();
    let out = bvmlab()
        .arg("oversmooth")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# schema_version=1,experiment=oversmoothing_demo,seed=11"));
    // Command-line flags override the file.
    let out = bvmlab()
        .arg("oversmooth")
        .arg("--config")
        .arg(&cfg)
        .args(["--seed", "12"])
        .output()
        .unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains("seed=12"));

    std::fs::write(&cfg, "experiment = dirichlet\n").unwrap();
    let out = bvmlab()
        .arg("oversmooth")
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bvmlab()
        .arg("oversmooth")
        .arg("--config")
        .arg(dir.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_failure_exits_with_3() {
    // A fixed α = 0.1 posterior undersmooths, so the oversmoothing
    // threshold (coverage < 0.2) fails.
    let out = bvmlab()
        .arg("oversmooth")
        .args(SMALL)
        .args(["--prior", "fixed:0.1", "--check"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stderr).unwrap().contains("[FAIL]"));

    let out = bvmlab()
        .arg("oversmooth")
        .args(SMALL)
        .arg("--check")
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8(out.stderr).unwrap().contains("[PASS]"));
}
