use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn models() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in ["inspection_robot.prism", "inspection_robot.props"] {
        std::fs::copy(models().join(f), dir.path().join(f)).unwrap();
    }
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contassure"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_reports_and_exits_one_on_violation() {
    let dir = setup();
    let o = run(dir.path(), &["check", "--model", "inspection_robot.prism"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 17);
    assert!(
        out.lines()
            .any(|l| l.starts_with("P_succ") && l.ends_with("0.932065")),
        "{out}"
    );
    assert!(out
        .lines()
        .any(|l| l.starts_with("R_dose") && l.ends_with("+infinity")));
    assert!(dir.path().join("inspection_robot.results.jsonl").is_file());
}

#[test]
fn check_exits_zero_when_bounds_hold() {
    let dir = setup();
    std::fs::write(
        dir.path().join("q.props"),
        "\"P_noForb\": P<=0 [ F loc = 5 ]\n",
    )
    .unwrap();
    let o = run(
        dir.path(),
        &[
            "check",
            "--model",
            "inspection_robot.prism",
            "--props",
            "q.props",
            "--const",
            "p_err=0",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("P_noForb  holds"));
}

#[test]
fn errors_exit_two_with_location() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.props"), "\"P\": P=? [ F loc = ]\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "check",
            "--model",
            "inspection_robot.prism",
            "--props",
            "bad.props",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.props:1:"), "{}", stderr(&o));

    let o = run(dir.path(), &["check", "--model", "missing.prism"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        dir.path(),
        &[
            "check",
            "--model",
            "inspection_robot.prism",
            "--const",
            "p_err",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = run(
        dir.path(),
        &[
            "check",
            "--model",
            "inspection_robot.prism",
            "--const",
            "nope=1",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown constant `nope`"));
}

#[test]
fn generate_is_deterministic_and_writes_dot() {
    let dir = setup();
    let o = run(
        dir.path(),
        &["generate", "--model", ".", "--out", "out", "--dot"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("argument v1 with 53 nodes"));
    let gsn = dir.path().join("out/inspection_robot.gsn");
    let first = std::fs::read(&gsn).unwrap();
    assert!(dir.path().join("out/inspection_robot.dot").is_file());
    let o = run(dir.path(), &["generate", "--model", ".", "--out", "out"]);
    assert!(stdout(&o).contains("unchanged"));
    assert_eq!(std::fs::read(&gsn).unwrap(), first);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = setup();
    std::fs::write(
        dir.path().join("contassure.conf"),
        "model = inspection_robot.prism\nout = from-config\nconst = p_err=0.5\n",
    )
    .unwrap();
    let o = run(dir.path(), &["check", "--const", "p_err=0.01"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("0.932065"));
    assert!(dir
        .path()
        .join("from-config/inspection_robot.results.jsonl")
        .is_file());

    std::fs::write(dir.path().join("other.conf"), "out = elsewhere\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "--config",
            "other.conf",
            "check",
            "--model",
            "inspection_robot.prism",
        ],
    );
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(dir
        .path()
        .join("elsewhere/inspection_robot.results.jsonl")
        .is_file());
}

#[test]
fn watch_runs_bounded_cycles() {
    let dir = setup();
    let o = run(
        dir.path(),
        &["watch", "--model", ".", "--cycles", "1", "--poll-ms", "10"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("cycle 1: 17 properties"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn lifecycle_subcommands() {
    let dir = setup();
    assert_eq!(
        run(dir.path(), &["generate", "--model", "."]).status.code(),
        Some(0)
    );
    let gsn = dir.path().join("inspection_robot.gsn");
    let mut text = std::fs::read_to_string(&gsn).unwrap();
    text.push_str("annotate G.P_succ placeholder monitor_id=\"C1\" phases=runtime\n");
    text.push_str("annotate G.P_succ placeholder confidence_threshold=\"0.95\" phases=runtime\n");
    std::fs::write(&gsn, text).unwrap();
    std::fs::write(
        dir.path().join("m.log"),
        "2026-03-01T10:00:00Z\tC1\tconfidence\t0.9\n",
    )
    .unwrap();

    let o = run(dir.path(), &["ingest", "--model", ".", "m.log"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("reopened (confidence 0.9 < 0.95)"));

    let o = run(dir.path(), &["impact", "--model", "."]);
    assert!(
        stdout(&o).starts_with("invalid=0 uncertain=2 valid=16"),
        "{}",
        stdout(&o)
    );
    let o = run(dir.path(), &["plan", "--model", "."]);
    assert!(
        stdout(&o).starts_with("1\tG.P_succ\tre-verify\tuncertain"),
        "{}",
        stdout(&o)
    );
    let o = run(dir.path(), &["apply", "--model", "."]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("2 goal(s) regenerated"));
    let text = std::fs::read_to_string(&gsn).unwrap();
    assert!(text.contains("annotate G.P_succ stereotype <<EvidenceProvided>> phases=evolution"));

    let o = run(dir.path(), &["ingest", "--model", "."]);
    assert_eq!(o.status.code(), Some(2));
}
