use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(rel)
}

fn running_inputs() -> Vec<PathBuf> {
    (1..=4)
        .map(|i| data(&format!("running/f{i}.cnf")))
        .collect()
}

fn iseq<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_iseq"))
        .args(args)
        .env_remove("ISEQ_SOLVER_PATH")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn analyze_running_sequence_matches_golden() {
    let mut args = vec![PathBuf::from("analyze")];
    args.extend(running_inputs());
    let out = iseq(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(
        out.stdout,
        std::fs::read(data("running/expected.iseq")).unwrap()
    );
    assert!(out.stdout.is_ascii());
}

#[test]
fn analyze_writes_output_file_and_verify_accepts_it() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("running.iseq");
    let mut args = vec![PathBuf::from("analyze"), "--output".into(), script.clone()];
    args.extend(running_inputs());
    assert_eq!(code(&iseq(&args)), 0);

    let mut args = vec![PathBuf::from("verify"), script.clone()];
    args.extend(running_inputs());
    let out = iseq(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn analyze_is_deterministic() {
    let mut args = vec![PathBuf::from("analyze"), "--kind".into(), "qbf".into()];
    args.push(data("qbf/h1.qdimacs"));
    args.push(data("qbf/h2.qdimacs"));
    let a = iseq(&args);
    let b = iseq(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        a.stdout,
        std::fs::read(data("qbf/expected_vars.iseq")).unwrap()
    );
}

#[test]
fn analyze_needs_two_inputs() {
    let out = iseq(["analyze".as_ref(), data("running/f1.cnf").as_os_str()]);
    assert_eq!(code(&out), 64);
}

#[test]
fn unknown_flag_is_usage_error_and_help_is_not() {
    assert_eq!(code(&iseq(["stats", "--bogus", "x"])), 64);
    assert_eq!(code(&iseq(["--help"])), 0);
    assert_eq!(code(&iseq(["--version"])), 0);
    assert_eq!(code(&iseq(["replay", "--backend", "cadical", "x"])), 64);
}

#[test]
fn analyze_parse_error_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cnf");
    std::fs::write(&bad, "p cnf 2 1\n1 x 0\n").unwrap();
    let out = iseq([
        "analyze".as_ref(),
        data("running/f1.cnf").as_os_str(),
        bad.as_os_str(),
    ]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("bad.cnf") && err.contains("line 2"), "{err}");
}

#[test]
fn analyze_missing_file_is_input_error() {
    let out = iseq(["analyze", "/nonexistent/a.cnf", "/nonexistent/b.cnf"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn analyze_incompatible_prefixes_cites_condition() {
    let out = iseq([
        "analyze".as_ref(),
        data("qbf/g1.qdimacs").as_os_str(),
        data("qbf/flip2.qdimacs").as_os_str(),
    ]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(
        err.contains("step 2") && err.contains("condition (ii)"),
        "{err}"
    );
}

#[test]
fn auto_kind_sniffs_first_input() {
    let out = iseq([
        "analyze".as_ref(),
        data("qbf/g1.qdimacs").as_os_str(),
        data("qbf/g2.qdimacs").as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("p iseq qbf 2 2\n"));
    // forcing sat on QDIMACS input rejects the quantifier lines
    let out = iseq([
        "analyze".as_ref(),
        "--kind".as_ref(),
        "sat".as_ref(),
        data("qbf/g1.qdimacs").as_os_str(),
        data("qbf/g2.qdimacs").as_os_str(),
    ]);
    assert_eq!(code(&out), 2);
}

fn report_statuses(report: &str) -> Vec<String> {
    report
        .lines()
        .filter(|l| l.starts_with("step "))
        .map(|l| l.split(' ').nth(2).unwrap().to_string())
        .collect()
}

#[test]
fn replay_running_script() {
    let out = iseq(["replay".as_ref(), data("running/expected.iseq").as_os_str()]);
    assert_eq!(code(&out), 0);
    let report = stdout(&out);
    assert_eq!(report_statuses(&report), ["SAT", "UNSAT", "SAT", "SAT"]);
    assert!(report
        .lines()
        .last()
        .unwrap()
        .starts_with("summary solves=4 sat=3 unsat=1 unknown=0 "));
}

#[test]
fn replay_qbf_on_reference_qbf() {
    let out = iseq([
        "replay".as_ref(),
        "--backend".as_ref(),
        "reference-qbf".as_ref(),
        data("qbf/expected.iseq").as_os_str(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(report_statuses(&stdout(&out)), ["SAT", "SAT"]);
}

#[test]
fn replay_qbf_on_sat_backend_is_capability_failure() {
    let out = iseq(["replay".as_ref(), data("qbf/expected.iseq").as_os_str()]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("capability"));
}

#[test]
fn replay_zero_timeout_is_unknown() {
    let out = iseq([
        "replay".as_ref(),
        "--timeout-ms".as_ref(),
        "0".as_ref(),
        data("running/expected.iseq").as_os_str(),
    ]);
    assert_eq!(code(&out), 4);
    assert_eq!(report_statuses(&stdout(&out)), ["UNKNOWN"; 4]);
}

#[test]
fn replay_qbf_over_var_cap_is_backend_failure() {
    let out = iseq([
        "replay".as_ref(),
        "--backend".as_ref(),
        "reference-qbf".as_ref(),
        "--qbf-var-cap".as_ref(),
        "1".as_ref(),
        data("qbf/expected.iseq").as_os_str(),
    ]);
    assert_eq!(code(&out), 5);
}

#[test]
fn replay_ipasir_library_lookup() {
    let out = iseq([
        "replay".as_ref(),
        "--backend".as_ref(),
        "ipasir:libmissing.so".as_ref(),
        data("running/expected.iseq").as_os_str(),
    ]);
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("libmissing.so"));

    // found on the search path, but no adapter is linked in
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("libstub.so"), b"").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_iseq"))
        .args(["replay", "--backend", "ipasir:libstub.so"])
        .arg(data("running/expected.iseq"))
        .env("ISEQ_SOLVER_PATH", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 5);
    assert!(stderr(&out).contains("libstub.so"));
}

#[test]
fn replay_report_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.txt");
    let out = iseq([
        "replay".as_ref(),
        "--output".as_ref(),
        report.as_os_str(),
        data("running/expected.iseq").as_os_str(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(report).unwrap();
    assert_eq!(report_statuses(&text), ["SAT", "UNSAT", "SAT", "SAT"]);
}

#[test]
fn verify_detects_deleted_clause() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("edited.iseq");
    let golden = std::fs::read_to_string(data("running/expected.iseq")).unwrap();
    // drop "-2 4 0" from the add block of step 2
    let edited = golden.replacen("add\n-2 4 0\n0\n", "", 1);
    assert_ne!(edited, golden);
    std::fs::write(&script, edited).unwrap();
    let mut args = vec![PathBuf::from("verify"), script];
    args.extend(running_inputs());
    let out = iseq(&args);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("step 2: missing clause -2 4 0"), "{err}");
}

#[test]
fn verify_reordered_originals_fail_at_first_step() {
    let mut inputs = running_inputs();
    inputs.swap(1, 2);
    let mut args = vec![PathBuf::from("verify"), data("running/expected.iseq")];
    args.extend(inputs);
    let out = iseq(&args);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.starts_with("step 2 does not match"), "{err}");
    assert!(!err.contains("step 3"), "{err}");
}

#[test]
fn verify_reports_prefix_difference() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("g2.qdimacs");
    std::fs::write(&other, "p cnf 2 2\ne 1 2 0\n1 0\n1 2 0\n").unwrap();
    let out = iseq([
        "verify".as_ref(),
        data("qbf/expected.iseq").as_os_str(),
        data("qbf/g1.qdimacs").as_os_str(),
        other.as_os_str(),
    ]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(
        err.contains("step 2: prefix (e{1,2}) expected, script gives (e{1}, a{2})"),
        "{err}"
    );
}

#[test]
fn verify_step_count_mismatch() {
    let mut args = vec![PathBuf::from("verify"), data("running/expected.iseq")];
    args.extend(running_inputs().into_iter().take(3));
    assert_eq!(code(&iseq(&args)), 1);
}

#[test]
fn stats_running_script() {
    let out = iseq(["stats".as_ref(), data("running/expected.iseq").as_os_str()]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for line in [
        "steps=4",
        "script_clauses=10",
        "distinct_script_clauses=8",
        "concatenated_clauses=19",
        "ratio=1.900000",
    ] {
        assert!(text.lines().any(|l| l == line), "{line} missing in\n{text}");
    }
}

#[test]
fn stats_identical_pair_ratio_two() {
    let f = data("running/f4.cnf");
    let out = iseq(["analyze".as_ref(), f.as_os_str(), f.as_os_str()]);
    assert_eq!(code(&out), 0);
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("pair.iseq");
    std::fs::write(&script, &out.stdout).unwrap();
    let out = iseq(["stats".as_ref(), script.as_os_str()]);
    assert!(
        stdout(&out).lines().any(|l| l == "ratio=2.000000"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn stats_rejects_malformed_script() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("bad.iseq");
    std::fs::write(&script, "p iseq sat 1 1\nstep 1\npop\nsolve\nend\n").unwrap();
    let out = iseq(["stats".as_ref(), script.as_os_str()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.iseq"));
}
