use std::process::Command;

fn fdcf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdcf"))
}

#[test]
fn solver_selftest_writes_csv_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("selftest.csv");
    let o = fdcf()
        .args(["selftest-solver", "--count", "12", "--seed", "9", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text
        .starts_with("case,vars,rows,affine_only,status,kkt_residual,objective,reference_gap\n"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn baseline_sweep_is_reproducible() {
    let run = || {
        let o = fdcf()
            .args([
                "wsee-vs-power",
                "--drops",
                "3",
                "--seed",
                "5",
                "--powers-dbm",
                "20,30",
                "--allocators",
                "EPA1,rpa",
            ])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let a = run();
    // 2 powers × 2 allocators × (3 drops + 1 aggregate), plus the header.
    assert_eq!(a.lines().count(), 17);
    assert!(a
        .lines()
        .next()
        .unwrap()
        .starts_with("sweep,fronthaul,variant,drop,"));
    assert_eq!(a, run());
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[frame]\ntau_t_dl = 2\n").unwrap();
    let o = fdcf()
        .args(["selftest-solver", "--count", "1", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tau_t_dl"));
}

#[test]
fn unknown_allocator_is_rejected() {
    let o = fdcf()
        .args(["wsee-vs-power", "--allocators", "GREEDY"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("GREEDY"));
}

#[test]
fn moment_validation_reports_every_term() {
    let o = fdcf()
        .args([
            "validate-moments",
            "--scenarios",
            "2",
            "--trials",
            "20000",
            "--seed",
            "3",
        ])
        .output()
        .unwrap();
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 7);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
