//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use common::oracle::{case_study, to_f64, Answer, CsParams};
use contassure::engine::*;
use contassure::gsn::names::*;
use contassure::gsn::*;
use contassure::lifecycle::*;
use contassure::model::{type_check, Value};
use contassure::parser::{parse_expr, parse_model, parse_properties, render_model};
use contassure::pipeline::{OutputPaths, PipelineConfig, PollOutcome, Watcher};
use contassure::statespace::{
    build_state_space, fix_deadlocks, label_states, BuildConfig, StateSpace,
};
use contassure::transformer::ArgumentTemplate;

/// Writes the verdict line past the test harness's output capture, then
/// fails the test if the criterion does not hold.
fn verdict(n: u32, title: &str, failures: Vec<String>, detail: &str) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut line = format!("acceptance {n} [{title}]: {status} ({detail})");
    for f in &failures {
        line += &format!("\n    - {f}");
    }
    writeln!(std::io::stdout().lock(), "{line}").unwrap();
    assert!(failures.is_empty(), "{line}");
}

fn space(overrides: &[(&str, Value)]) -> StateSpace {
    fix_deadlocks(build_state_space(&common::robot(overrides), &BuildConfig::default()).unwrap())
}

fn value_of(sp: &StateSpace, text: &str) -> VerificationResult {
    let p = parse_properties(&format!("\"q\": {text}\n"))
        .unwrap()
        .remove(0);
    check_property(sp, &p, &SolverConfig::default()).unwrap()
}

fn num(r: &VerificationResult) -> f64 {
    r.value.expect("numeric result").as_f64()
}

#[test]
fn criterion_1_parser_fidelity() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let text = common::robot_source();
    let ast = parse_model(&text).expect("model parses");
    if let Err(d) = type_check(&ast) {
        failures.push(format!("type check: {d}"));
    }
    let rendered = render_model(&ast);
    match parse_model(&rendered) {
        Ok(again) if again == ast => {}
        Ok(_) => failures.push("render then parse changed the model".into()),
        Err(d) => failures.push(format!("rendered model does not parse: {d}")),
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(
        1,
        "parser fidelity",
        failures,
        &format!("{} modules, {:?}", ast.modules.len(), elapsed),
    );
}

#[test]
fn criterion_2_oracle_equivalence() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let params = CsParams::default();
    let oracle = case_study(&params);
    let expected = oracle.table2(&params);
    let sp = space(&[]);
    if sp.len() != oracle.states.len() {
        failures.push(format!(
            "{} states, oracle {}",
            sp.len(),
            oracle.states.len()
        ));
    }
    let props = parse_properties(&common::robot_props_source()).unwrap();
    let mut worst: f64 = 0.0;
    for (p, (name, answer)) in props.iter().zip(&expected) {
        let r = check_property(&sp, p, &SolverConfig::default()).unwrap();
        match answer {
            Answer::Prob(v) | Answer::Reward(Some(v)) => {
                let err = (num(&r) - to_f64(v)).abs();
                worst = worst.max(err);
                if err > 1e-7 {
                    failures.push(format!("{name}: {} vs exact {}", num(&r), to_f64(v)));
                }
            }
            Answer::Reward(None) => {
                if r.value != Some(ResultValue::Infinity) {
                    failures.push(format!("{name}: expected +infinity, got {:?}", r.value));
                }
            }
            Answer::Verdict(b) => {
                if r.verdict != Some(*b) {
                    failures.push(format!("{name}: verdict {:?}, exact {b}", r.verdict));
                }
            }
        }
    }
    if props.len() != 17 {
        failures.push(format!("{} properties", props.len()));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        failures.push(format!("took {elapsed:?}"));
    }
    verdict(
        2,
        "oracle equivalence",
        failures,
        &format!(
            "{} states, 17 properties, max deviation {worst:.1e}, {elapsed:?}",
            sp.len()
        ),
    );
}

#[test]
fn criterion_3_closed_forms() {
    let mut failures = Vec::new();
    let no_rad = [
        ("p_rad_crit", Value::Real(0.0)),
        ("p_rad_med", Value::Real(0.0)),
    ];
    let sp = space(&no_rad);
    let succ = num(&value_of(&sp, "P=? [ F loc = 4 ]"));
    if (succ - 0.99f64.powi(4)).abs() > 1e-9 {
        failures.push(format!("P_succ = {succ}, expected 0.96059601"));
    }
    let sp = space(&[no_rad[0], no_rad[1], ("p_err", Value::Real(0.0))]);
    let moves = value_of(&sp, "R{\"moves\"}=? [ F (loc = 4 | loc = 5 | loc = 6) ]");
    let moves_v = moves.value.map(ResultValue::as_f64).unwrap_or(f64::NAN);
    if (moves_v - 12.0).abs() > 1e-6 {
        failures.push(format!("R_moves = {moves_v}, expected 12"));
    }
    let forb = value_of(&sp, "P=? [ F loc = 5 ]");
    if num(&forb) != 0.0 {
        failures.push(format!("P_forb = {}, expected exactly 0", num(&forb)));
    }
    let qual = value_of(&sp, "P<=0 [ F loc = 5 ]");
    if qual.verdict != Some(true) || qual.engine != "graph" {
        failures.push(format!(
            "P<=0 [ F loc = 5 ]: {:?} via {}",
            qual.verdict, qual.engine
        ));
    }
    verdict(
        3,
        "closed forms",
        failures,
        &format!(
            "P_succ={succ:.10}, R_moves={moves_v}, P_forb={}",
            num(&forb)
        ),
    );
}

#[test]
fn criterion_4_structural_identities() {
    let mut failures = Vec::new();
    let sp = space(&[]);
    let f = |l: i64| num(&value_of(&sp, &format!("P=? [ F loc = {l} ]")));
    let safe = num(&value_of(&sp, "P=? [ G loc != 5 ]"));
    let complement = safe + f(5);
    if (complement - 1.0).abs() > 1e-8 {
        failures.push(format!("P_safe + P_forb = {complement:.12}"));
    }
    let partition = f(4) + f(5) + f(6);
    if (partition - 1.0).abs() > 1e-8 {
        failures.push(format!(
            "P(F loc=4) + P(F loc=5) + P(F loc=6) = {partition:.12}; the remaining {:.12} is the mass absorbed in the radiation-stop states",
            1.0 - partition
        ));
    }
    let bounded: Vec<f64> = (0..=10)
        .map(|k| num(&value_of(&sp, &format!("P=? [ F<={k} loc = 4 ]"))))
        .collect();
    if let Some(k) = bounded.windows(2).position(|w| w[1] < w[0]) {
        failures.push(format!("bounded F decreases at k={}", k + 1));
    }
    verdict(
        4,
        "structural identities",
        failures,
        &format!("complement {complement:.12}, partition {partition:.12}, bounded F k=0..10 ends at {:.6}", bounded[10]),
    );
}

#[test]
fn criterion_5_invariant_scan() {
    let sp = space(&[]);
    let inv =
        parse_expr("(sw = 0 => vel = 2) & (sw = 1 => vel = 1) & (sw = 2 => vel = 0)").unwrap();
    let good = label_states(&sp, &inv).unwrap();
    let failures: Vec<String> = (0..sp.len())
        .filter(|s| !good.contains(*s))
        .take(5)
        .map(|s| format!("violated in {}", sp.describe_state(s)))
        .collect();
    verdict(
        5,
        "mode/speed invariant",
        failures,
        &format!("{} reachable states scanned", sp.len()),
    );
}

#[test]
fn criterion_6_transformation_law() {
    let mut failures = Vec::new();
    let n = parse_properties(&common::robot_props_source())
        .unwrap()
        .len();
    let arg = common::robot_argument(&[]);
    let supported = arg
        .links
        .iter()
        .filter(|l| l.kind == LinkKind::SupportedBy)
        .count();
    let in_context = arg
        .links
        .iter()
        .filter(|l| l.kind == LinkKind::InContextOf)
        .count();
    if arg.nodes.len() != 2 + 3 * n {
        failures.push(format!("{} nodes", arg.nodes.len()));
    }
    if supported != 1 + 2 * n {
        failures.push(format!("{supported} supported-by links"));
    }
    if in_context != n {
        failures.push(format!("{in_context} in-context-of links"));
    }
    let issues = validate_argument(&arg);
    if !issues.is_empty() {
        failures.push(format!("validation: {issues:?}"));
    }
    let a = serialize_dsl(&arg);
    let b = serialize_dsl(&common::robot_argument(&[]));
    if a != b {
        failures.push("serialisation differs between runs".into());
    }
    verdict(
        6,
        "transformation law",
        failures,
        &format!(
            "n={n}: {} nodes, {supported} supported-by, {in_context} in-context-of",
            arg.nodes.len()
        ),
    );
}

fn workspace() -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("inspection_robot.prism");
    let props = dir.path().join("inspection_robot.props");
    std::fs::write(&model, common::robot_source()).unwrap();
    std::fs::write(&props, common::robot_props_source()).unwrap();
    let cfg = PipelineConfig::new(model, props, dir.path().join("out"));
    (dir, cfg)
}

fn node_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| l.starts_with("node "))
        .map(|l| (l.split(' ').nth(1).unwrap().to_string(), l.to_string()))
        .collect()
}

fn replace_in(path: &Path, from: &str, to: &str) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.contains(from));
    std::fs::write(path, text.replacen(from, to, 1)).unwrap();
}

#[test]
fn criterion_7_regeneration_and_merge() {
    let mut failures = Vec::new();
    let (_dir, cfg) = workspace();
    let gsn = OutputPaths::new(&cfg).gsn;
    let mut watcher = Watcher::new(cfg.clone()).unwrap();
    assert!(matches!(watcher.poll_once(), PollOutcome::Cycle { .. }));

    let mut arg = parse_dsl(&std::fs::read_to_string(&gsn).unwrap()).unwrap();
    let manual = [
        Annotation::placeholder("G.P_succ", EVIDENCE_COST, "2h", &[Phase::Design]),
        Annotation::stereotype(
            "G.P_slowSpeed",
            "TraceMonitored",
            &[Phase::Design, Phase::Runtime],
        ),
        Annotation::stereotype(
            "G.P_fullSpeed",
            "RuntimeAssumptionMonitor",
            &[Phase::Runtime],
        ),
    ];
    for a in &manual {
        arg.annotate(a.clone()).unwrap();
    }
    std::fs::write(&gsn, serialize_dsl(&arg)).unwrap();
    let before = std::fs::read_to_string(&gsn).unwrap();

    replace_in(&cfg.model, "p_err        = 0.01;", "p_err        = 0.02;");
    let outcome = watcher.poll_once();
    let PollOutcome::Cycle { outcome, .. } = outcome else {
        panic!("expected a cycle, got {outcome:?}");
    };
    let after = std::fs::read_to_string(&gsn).unwrap();
    let regenerated = parse_dsl(&after).unwrap();

    for a in &manual {
        if !regenerated.annotations.contains(a) {
            failures.push(format!("lost annotation on {}", a.node));
        }
    }

    // affected: goals and solutions of properties whose result changed, and
    // the root, whose model trace changed
    let props = parse_properties(&common::robot_props_source()).unwrap();
    let old = common::check_all(&common::robot(&[]), &props);
    let new = common::check_all(&common::robot(&[("p_err", Value::Real(0.02))]), &props);
    let mut expected: BTreeSet<String> = BTreeSet::from([ROOT_ID.to_string()]);
    for (o, n) in old.iter().zip(&new) {
        if o.fingerprint != n.fingerprint {
            expected.insert(goal_id(&o.name));
            expected.insert(solution_id(&o.name));
        }
    }
    let bumped: BTreeSet<String> = outcome.bumped.iter().cloned().collect();
    if bumped != expected {
        failures.push(format!("bumped {bumped:?}, expected {expected:?}"));
    }
    let old_lines = node_lines(&before);
    let new_lines = node_lines(&after);
    let mut identical = 0;
    for ((id, a), (_, b)) in old_lines.iter().zip(&new_lines) {
        if !expected.contains(id) {
            if a != b {
                failures.push(format!("unaffected node {id} changed: {b}"));
            }
            identical += 1;
        }
    }
    if regenerated.version != arg.version + 1 {
        failures.push(format!("argument version {}", regenerated.version));
    }
    verdict(
        7,
        "regeneration and merge",
        failures,
        &format!(
            "3 manual annotations kept, {} nodes bumped, {identical} nodes byte-identical",
            bumped.len()
        ),
    );
}

#[test]
fn criterion_8_lifecycle_end_to_end() {
    let mut failures = Vec::new();
    let mut arg = common::robot_argument(&[]);
    for (goal, monitor, cost) in [("G.P_succ", "C1", "1d"), ("G.P_safe", "C2", "2h")] {
        arg.set_placeholder(goal, MONITOR_ID, monitor, &[Phase::Runtime])
            .unwrap();
        arg.set_placeholder(goal, CONFIDENCE_THRESHOLD, "0.95", &[Phase::Runtime])
            .unwrap();
        arg.set_placeholder(goal, EVIDENCE_COST, cost, &[Phase::Design])
            .unwrap();
    }
    let events = parse_monitor_log(
        "2026-03-01T10:00:00Z\tC1\tconfidence\t0.90\n2026-03-01T10:00:00Z\tC2\tconfidence\t0.80\n",
    )
    .unwrap();
    let (reopened, _) = ingest_monitor_events(&arg, &events).unwrap();
    for g in ["G.P_succ", "G.P_safe"] {
        if !(reopened.has_stereotype(g, REOPENED) && reopened.has_stereotype(g, DEFERRED_EVIDENCE))
        {
            failures.push(format!("{g} not Reopened + DeferredEvidence"));
        }
    }

    let (report, annotated) =
        impact_analysis(&reopened, &EvolutionPackage::default(), None).unwrap();
    for g in ["G.P_succ", "G.P_safe"] {
        if report.class_of(g) != Some(ImpactClass::Uncertain) {
            failures.push(format!("{g} classified {:?}", report.class_of(g)));
        }
    }

    let (plan, planned) = plan_regeneration(&report, &annotated).unwrap();
    let order: Vec<&str> = plan.entries.iter().map(|e| e.goal.as_str()).collect();
    if order != ["G.P_safe", "G.P_succ", ROOT_ID] {
        failures.push(format!("plan order {order:?}"));
    }

    let props = parse_properties(&common::robot_props_source()).unwrap();
    let fresh = common::check_all(&common::robot(&[]), &props);
    let out =
        apply_regeneration(&planned, &plan, &fresh, &ArgumentTemplate::default(), &[]).unwrap();
    for g in ["G.P_succ", "G.P_safe"] {
        if !out.has_stereotype(g, EVIDENCE_PROVIDED) {
            failures.push(format!("{g} lacks EvidenceProvided"));
        }
        if out.nodes[g].version != reopened.nodes[g].version + 1 {
            failures.push(format!("{g} at v{}", out.nodes[g].version));
        }
    }
    let errors: Vec<String> = validate_argument(&out)
        .into_iter()
        .filter(|i| i.is_error())
        .map(|i| i.to_string())
        .collect();
    failures.extend(errors);
    failures.extend(
        state_machine_violations(&out)
            .into_iter()
            .map(|g| format!("state machine broken at {g}")),
    );
    verdict(
        8,
        "lifecycle end to end",
        failures,
        &format!(
            "{} reopened, plan {order:?}, argument v{} -> v{}",
            2, arg.version, out.version
        ),
    );
}

#[test]
fn criterion_9_failure_isolation() {
    let mut failures = Vec::new();
    let (_dir, cfg) = workspace();
    let gsn = OutputPaths::new(&cfg).gsn;
    let mut watcher = Watcher::new(cfg.clone()).unwrap();
    assert!(matches!(watcher.poll_once(), PollOutcome::Cycle { .. }));
    let before = std::fs::read(&gsn).unwrap();

    replace_in(&cfg.props, "P=? [ G loc != 5 ]", "P=? [ G loc != ]");
    let outcome = watcher.poll_once();
    let line = outcome.log_line().unwrap_or_default();
    if !matches!(outcome, PollOutcome::Failed { .. }) {
        failures.push(format!("cycle did not fail: {line}"));
    }
    if !line.contains("inspection_robot.props:") {
        failures.push(format!("log line lacks the error location: {line}"));
    }
    if std::fs::read(&gsn).unwrap() != before {
        failures.push(".gsn changed".into());
    }
    verdict(9, "failure isolation", failures, &line);
}
