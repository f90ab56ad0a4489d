//! CLI acceptance: determinism of machine-readable output (two runs on the
//! same inputs are byte identical) and the exit-code contract.

use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(file: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("../../corpus");
    p.push(file);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erasecheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

#[test]
fn acceptance_5_machine_output_is_byte_identical() {
    let commands: Vec<Vec<String>> = vec![
        vec![
            "check-system".into(),
            corpus("figure1.sys"),
            "--format".into(),
            "json".into(),
        ],
        vec![
            "check-user".into(),
            corpus("usr1.usr"),
            "--format".into(),
            "json".into(),
        ],
        vec![
            "theorem".into(),
            corpus("streamab.usr"),
            corpus("streamab.sys"),
            "--format".into(),
            "json".into(),
        ],
        vec![
            "check-composite".into(),
            corpus("mod10.usr"),
            corpus("mod10.sys"),
            "--format".into(),
            "json".into(),
        ],
        vec![
            "oracle-compare".into(),
            "composite-erasure".into(),
            corpus("ex_a.sys"),
            corpus("usr1.usr"),
            "--format".into(),
            "json".into(),
        ],
    ];
    for args in &commands {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let first = run(&args);
        let second = run(&args);
        assert_eq!(
            first.stdout, second.stdout,
            "output of {args:?} differs between runs"
        );
        assert_eq!(code(&first), code(&second));
        assert!(!first.stdout.is_empty());
    }
    println!("ACCEPTANCE 5 byte-identical machine-readable reports: PASS");
}

#[test]
fn exit_zero_when_all_checks_pass() {
    let out = run(&["check-system", &corpus("ex_a.sys"), "--depth", "8"]);
    assert_eq!(
        code(&out),
        0,
        "stdout: {}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn exit_one_on_failing_user_with_breakdown() {
    let out = run(&["check-user", &corpus("usr1.usr")]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("singularity: FAIL"));
    assert!(text.contains("user-well-formed: PASS"));
}

#[test]
fn theorem_reports_consistent_despite_failures() {
    let out = run(&[
        "theorem",
        &corpus("streamab.usr"),
        &corpus("streamab.sys"),
        "--format",
        "json",
    ]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"consistent\": true"));
}

#[test]
fn composite_check_of_minimal_pair_passes() {
    let out = run(&[
        "check-composite",
        &corpus("minimal.usr"),
        &corpus("minimal.sys"),
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn exit_three_on_inconclusive_only() {
    // At depth 3 the streamab block cannot close, so input erasure is
    // inconclusive while everything else passes.
    let out = run(&["check-system", &corpus("streamab.sys"), "--depth", "3"]);
    assert_eq!(code(&out), 3);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("INCONCLUSIVE"));
}

#[test]
fn exit_two_on_parse_error_and_kind_mismatch() {
    let dir = std::env::temp_dir().join("erasecheck-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.sys");
    std::fs::write(&bad, "system broken\ndomain {0, 1}\n").unwrap();
    let out = run(&["check-system", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());

    let out = run(&["check-system", &corpus("usr1.usr")]);
    assert_eq!(code(&out), 2);

    let out = run(&["check-user", &corpus("missing-file.usr")]);
    assert_eq!(code(&out), 2);

    let out = run(&["check-user", &corpus("minimal.usr"), "--depth", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn compose_emits_dot() {
    let dir = std::env::temp_dir().join("erasecheck-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let dot = dir.join("minimal.dot");
    let out = run(&[
        "compose",
        &corpus("minimal.usr"),
        &corpus("minimal.sys"),
        "--emit-dot",
        dot.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&dot).unwrap();
    assert!(text.starts_with("digraph composed {"));
    assert!(text.contains("\"u0|s0\""));
}

#[test]
fn figure1_report_matches_the_golden_snapshot() {
    // Frozen text report of the credit-card example: both runs are shown,
    // each ending at the diverging log output.
    let out = run(&["check-system", &corpus("figure1.sys")]);
    assert_eq!(code(&out), 1);
    let expected = include_str!("golden/figure1_check_system.txt");
    assert_eq!(String::from_utf8_lossy(&out.stdout), expected);
}

#[test]
fn oracle_compare_agrees_on_corpus() {
    let out = run(&[
        "oracle-compare",
        "input-erasure",
        &corpus("figure1.sys"),
        "--depth",
        "8",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("agree"));
    assert!(text.contains("FAIL"));
}
