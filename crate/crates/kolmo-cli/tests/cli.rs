//! End-to-end runs of the `kolmo` binary: the exit-code contract,
//! determinism of emitted files, and resume-after-interrupt equivalence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kolmo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmo"))
        .current_dir(dir)
        .env_remove("KOLMO_PROFILE")
        .args(args)
        .output()
        .expect("the binary should spawn")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn enumerate_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        fs::create_dir_all(d).unwrap();
        let out = kolmo(d, &["enumerate", "--stage", "12"]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let ledger_a = fs::read(a.join("enumeration.ledger")).unwrap();
    let ledger_b = fs::read(b.join("enumeration.ledger")).unwrap();
    assert_eq!(ledger_a, ledger_b);
    let sum_a = fs::read(a.join("enumeration-summary.csv")).unwrap();
    let sum_b = fs::read(b.join("enumeration-summary.csv")).unwrap();
    assert_eq!(sum_a, sum_b);
}

#[test]
fn resume_after_interrupt_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Stage 12 wants 98304 work units; the cap stops the run at 11.
    let out = kolmo(
        d,
        &["enumerate", "--stage", "12", "--work-cap", "50000", "--ledger", "part.ledger"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let partial = fs::read_to_string(d.join("part.ledger")).unwrap();
    assert!(partial.starts_with("# kolmo-ledger v1 profile="), "{partial}");
    assert!(partial.lines().next().unwrap().ends_with("watermark=11"));

    let out = kolmo(d, &["enumerate", "--stage", "12", "--resume", "--ledger", "part.ledger"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = kolmo(d, &["enumerate", "--stage", "12", "--ledger", "full.ledger"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let resumed = fs::read(d.join("part.ledger")).unwrap();
    let direct = fs::read(d.join("full.ledger")).unwrap();
    assert_eq!(resumed, direct);
}

#[test]
fn stage_zero_writes_a_header_only_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(dir.path(), &["enumerate", "--stage", "0"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ledger = fs::read_to_string(dir.path().join("enumeration.ledger")).unwrap();
    assert_eq!(ledger.lines().count(), 1);
    assert!(ledger.lines().next().unwrap().ends_with("watermark=0"));
}

#[test]
fn resuming_under_a_different_profile_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = kolmo(d, &["enumerate", "--stage", "6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = kolmo(d, &["enumerate", "--stage", "8", "--resume", "--profile", "bytecode-only"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("not the current profile"));
}

#[test]
fn bm_monitor_emits_the_exact_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(
        dir.path(),
        &["monitor", "bm", "--f", "const2len", "--src", "zeros", "--n", "64"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("extremum -3"));
    let csv = fs::read_to_string(dir.path().join("monitor-bm.csv")).unwrap();
    // n − (2n + 2) per row, supremum −3 from n = 1 onward.
    assert!(csv.contains("\n1,-3,-3,true\n"), "{csv}");
    assert!(csv.contains("\n10,-12,-3,true\n"), "{csv}");
    assert!(csv.ends_with("64,-66,-3,true\n"), "{csv}");
}

#[test]
fn matched_selection_reports_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(
        dir.path(),
        &["nogap", "select", "--h", "identity", "--phi", "linear", "--count", "6"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("selected = inserted: true"), "{text}");
    assert!(text.contains("selected bits all zero: true"), "{text}");
    assert!(dir.path().join("nogap-trace.txt").exists());
    assert!(dir.path().join("nogap-bias.csv").exists());
}

#[test]
fn help_enumerates_the_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(dir.path(), &["--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Exit codes"), "{text}");
    for line in ["0  success", "2  ledger", "3  enumeration work"] {
        assert!(text.contains(line), "missing {line:?} in {text}");
    }
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "# demo config\nstage = 6\n").unwrap();
    let out = kolmo(d, &["enumerate", "--config", "run.cfg"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("watermark 6"), "{}", stdout(&out));
    let out = kolmo(d, &["enumerate", "--config", "run.cfg", "--stage", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("watermark 4"), "{}", stdout(&out));
}

#[test]
fn over_budget_allocation_exits_1_with_the_partial_table() {
    let dir = tempfile::tempdir().unwrap();
    // k = 0 consumes the whole unit budget; the next request must fail.
    let out = kolmo(dir.path(), &["kc", "alloc", "--requests", "0,1"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("kc-alloc.csv")).unwrap();
    assert!(csv.contains("0,0,ε"), "{csv}");
    assert!(csv.contains("# free_weight=0"), "{csv}");
}

#[test]
fn ktriv_run_then_compile_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = kolmo(d, &["ktriv", "run", "--stage", "14", "--nmax", "4", "--c", "16"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("within_2d true"));
    let out = kolmo(d, &["ktriv", "compile"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("leaves"), "{}", stdout(&out));
}
