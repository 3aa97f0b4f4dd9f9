mod common;

use std::collections::BTreeSet;

use contassure::gsn::names::*;
use contassure::gsn::*;
use contassure::model::Value;
use contassure::parser::parse_properties;
use contassure::transformer::*;
use proptest::prelude::*;

fn props() -> Vec<contassure::model::PropertySpec> {
    parse_properties(&common::robot_props_source()).unwrap()
}

#[test]
fn case_study_argument_shape() {
    let arg = common::robot_argument(&[]);
    assert_eq!(arg.name, "inspection_robot");
    assert_eq!(arg.version, 1);
    assert_eq!(arg.nodes.len(), 2 + 3 * 17);
    let count = |k: LinkKind| arg.links.iter().filter(|l| l.kind == k).count();
    assert_eq!(count(LinkKind::SupportedBy), 1 + 2 * 17);
    assert_eq!(count(LinkKind::InContextOf), 17);
    assert_eq!(arg.roots(), vec![ROOT_ID]);
    assert!(arg.nodes.values().all(|n| n.version == 1));
    assert_eq!(
        arg.nodes[ROOT_ID].description,
        "Model inspection_robot satisfies all of its specified properties"
    );
    assert_eq!(
        arg.nodes["G.P_succ"].description,
        "Property P_succ holds for model inspection_robot"
    );
    assert_eq!(
        arg.nodes["C.P_fullSpeed"].description,
        "P>=1 [ G (sw = 0 => vel = 2) ]"
    );
    assert_eq!(
        arg.nodes["E.P_succ"].description,
        "Verification result for P_succ: 0.932065"
    );
    assert_eq!(
        arg.nodes["E.P_fullSpeed"].description,
        "Verification result for P_fullSpeed: holds"
    );
    assert_eq!(
        arg.nodes["E.P_noOpOutside"].description,
        "Verification result for P_noOpOutside: violated"
    );
    assert_eq!(
        arg.nodes["E.R_dose"].description,
        "Verification result for R_dose: +infinity"
    );
}

#[test]
fn deferral_marks_only_failed_goals() {
    let arg = common::robot_argument(&[]);
    let deferred: Vec<&str> = arg
        .annotations
        .iter()
        .filter(|a| a.stereotype_name() == Some(DEFERRED_EVIDENCE))
        .map(|a| a.node.as_str())
        .collect();
    let model = common::robot(&[]);
    let failed: Vec<String> = common::check_all(&model, &props())
        .iter()
        .filter(|r| r.verdict == Some(false) || r.marginal)
        .map(|r| goal_id(&r.name))
        .collect();
    assert_eq!(
        deferred,
        vec!["G.P_warnMode", "G.P_critMode", "G.P_noOpOutside"]
    );
    assert_eq!(deferred, failed);
    assert!(arg
        .annotations
        .iter()
        .all(|a| a.generated && a.phases == vec![Phase::Design]));
}

#[test]
fn trace_links_carry_fingerprints() {
    let model = common::robot(&[]);
    let arg = common::robot_argument(&[]);
    let root: Vec<_> = arg.traces_of(ROOT_ID).collect();
    assert_eq!(root.len(), 1);
    assert_eq!(root[0].artifact, ArtifactKind::ModelFile);
    assert_eq!(root[0].fingerprint.as_deref(), Some(model.fingerprint()));
    let p = props().into_iter().find(|p| p.name == "P_succ").unwrap();
    let g: Vec<_> = arg.traces_of("G.P_succ").collect();
    assert_eq!(g[0].fingerprint, Some(property_fingerprint(&p)));
    let e: Vec<_> = arg.traces_of("E.P_succ").collect();
    assert_eq!(e[0].artifact, ArtifactKind::VerificationResult);
    let v: f64 = e[0].value.as_deref().unwrap().parse().unwrap();
    assert!((v - 0.932065).abs() < 5e-7, "{v}");
    assert_eq!(
        arg.traces_of("E.P_fullSpeed")
            .next()
            .unwrap()
            .value
            .as_deref(),
        Some("true")
    );
    assert_eq!(
        arg.traces_of("E.R_dose").next().unwrap().value.as_deref(),
        Some("+infinity")
    );
}

#[test]
fn result_set_must_match_properties() {
    let model = common::robot(&[]);
    let ps = props();
    let results = common::check_all(&model, &ps);
    let mr = common::model_ref(&model);
    let t = ArgumentTemplate::default();
    let err = build_argument(&mr, &ps, &results[1..], &t).unwrap_err();
    assert_eq!(err, TransformError::MissingResult("P_succ".into()));
    let err = build_argument(&mr, &ps[1..], &results, &t).unwrap_err();
    assert_eq!(err, TransformError::UnexpectedResult("P_succ".into()));
    let mut dup = ps.clone();
    dup.push(ps[0].clone());
    let err = build_argument(&mr, &dup, &results, &t).unwrap_err();
    assert_eq!(err, TransformError::DuplicateProperty("P_succ".into()));
}

#[test]
fn empty_property_list_gives_root_only() {
    let model = common::robot(&[]);
    let arg = build_argument(
        &common::model_ref(&model),
        &[],
        &[],
        &ArgumentTemplate::default(),
    )
    .unwrap();
    assert_eq!(arg.nodes.len(), 2);
    let issues = validate_argument(&arg);
    assert!(issues.iter().all(|i| !i.is_error()));
    assert!(issues.iter().any(|i| i.message == "no sub-goals"));
}

#[test]
fn templates_parse_and_check() {
    let t = ArgumentTemplate::parse(
        "# custom\ngoal = {property} is satisfied by {model}\nsolution = {{{result}}}\n",
    )
    .unwrap();
    assert_eq!(t.goal, "{property} is satisfied by {model}");
    assert_eq!(t.root, ArgumentTemplate::default().root);
    t.check().unwrap();
    let model = common::robot(&[]);
    let ps = props();
    let results = common::check_all(&model, &ps);
    let arg = build_argument(&common::model_ref(&model), &ps, &results, &t).unwrap();
    assert_eq!(
        arg.nodes["G.P_safe"].description,
        "P_safe is satisfied by inspection_robot"
    );
    assert_eq!(arg.nodes["E.P_fullSpeed"].description, "{holds}");

    let bad = ArgumentTemplate::parse("root = {property}\n").unwrap();
    assert_eq!(
        bad.check().unwrap_err(),
        TransformError::UnresolvedVariable {
            template: "root".into(),
            variable: "property".into()
        }
    );
    assert!(matches!(
        ArgumentTemplate::parse("leaf = x"),
        Err(TransformError::BadTemplate { .. })
    ));
    assert!(matches!(
        ArgumentTemplate::parse("goal x"),
        Err(TransformError::BadTemplate { .. })
    ));
    let unterminated = ArgumentTemplate::parse("goal = {model").unwrap();
    assert!(matches!(
        unterminated.check(),
        Err(TransformError::BadTemplate { .. })
    ));
}

#[test]
fn regeneration_is_a_fixpoint() {
    let first = common::robot_argument(&[]);
    let again = regenerate(&first, &common::robot_argument(&[]));
    assert_eq!(serialize_dsl(&again), serialize_dsl(&first));
}

#[test]
fn constant_change_bumps_affected_nodes() {
    let before = common::robot_argument(&[]);
    let after = regenerate(
        &before,
        &common::robot_argument(&[("p_err", Value::Real(0.05))]),
    );
    let bumped: BTreeSet<&str> = after
        .nodes
        .values()
        .filter(|n| n.version != before.nodes[&n.id].version)
        .map(|n| n.id.as_str())
        .collect();

    let changed_results: BTreeSet<String> = before
        .traces
        .iter()
        .filter(|t| t.artifact == ArtifactKind::VerificationResult)
        .filter(|t| after.traces_of(&t.node).next() != Some(t))
        .map(|t| t.reference.clone())
        .collect();
    assert!(changed_results.contains("P_succ"));
    assert!(!changed_results.contains("P_fullSpeed"));
    assert!(!changed_results.contains("R_dose"));
    let mut expected: BTreeSet<String> = changed_results
        .iter()
        .flat_map(|p| [goal_id(p), solution_id(p)])
        .collect();
    expected.insert(ROOT_ID.to_string());
    assert_eq!(bumped, expected.iter().map(String::as_str).collect());
    assert!(after.nodes.values().all(|n| n.version <= 2));
    assert_eq!(after.version, 2);
    assert!(validate_argument(&after).iter().all(|i| !i.is_error()));
}

#[test]
fn renamed_property_orphans_annotations() {
    let mut before = common::robot_argument(&[]);
    before
        .set_placeholder("G.P_succ", EVIDENCE_COST, "3h", &[Phase::Design])
        .unwrap();
    before = attach_external_evidence(&before, "G.P_succ", "A1_Reach").unwrap();

    let text = common::robot_props_source().replace("\"P_succ\"", "\"P_reach\"");
    let ps = parse_properties(&text).unwrap();
    let model = common::robot(&[]);
    let results = common::check_all(&model, &ps);
    let fresh = build_argument(
        &common::model_ref(&model),
        &ps,
        &results,
        &ArgumentTemplate::default(),
    )
    .unwrap();
    let after = regenerate(&before, &fresh);

    assert!(after.node("G.P_succ").is_none());
    assert_eq!(after.nodes["G.P_reach"].version, 1);
    assert_eq!(after.nodes["E.P_reach"].version, 1);
    assert_eq!(after.quarantine.annotations.len(), 1);
    assert_eq!(after.quarantine.traces.len(), 1);
    assert_eq!(after.quarantine.traces[0].reference, "A1_Reach");
    assert_eq!(after.nodes[ROOT_ID].version, 1);
    assert_eq!(after.version, 2);
    let text = serialize_dsl(&after);
    assert!(text.contains("# orphaned\n"));
    assert_eq!(parse_dsl(&text).unwrap(), after);
}

#[test]
fn external_evidence_attaches_in_order() {
    let arg = common::robot_argument(&[]);
    let once = attach_external_evidence(&arg, "G.P_slowSpeed", "A4_ModeSwitch").unwrap();
    let twice = attach_external_evidence(&once, "G.P_slowSpeed", "A5_Speed").unwrap();
    let ext: Vec<&str> = twice
        .traces_of("G.P_slowSpeed")
        .filter(|t| t.artifact == ArtifactKind::ExternalEvidence)
        .map(|t| t.reference.as_str())
        .collect();
    assert_eq!(ext, vec!["A4_ModeSwitch", "A5_Speed"]);
    assert!(twice
        .traces_of("G.P_slowSpeed")
        .all(|t| t.artifact != ArtifactKind::ExternalEvidence || t.fingerprint.is_none()));
    assert!(validate_argument(&twice).iter().all(|i| !i.is_error()));
    assert_eq!(
        attach_external_evidence(&arg, "G.nope", "x").unwrap_err(),
        GsnError::UnknownNode("G.nope".into())
    );

    // survives regeneration and does not bump the goal
    let after = regenerate(&twice, &common::robot_argument(&[]));
    assert_eq!(after.traces_of("G.P_slowSpeed").count(), 3);
    assert_eq!(after.nodes["G.P_slowSpeed"].version, 1);
}

#[test]
fn evidence_provided_is_dropped_when_deferral_returns() {
    let mut before = common::robot_argument(&[]);
    before.remove_stereotype("G.P_noOpOutside", DEFERRED_EVIDENCE);
    before
        .add_stereotype("G.P_noOpOutside", EVIDENCE_PROVIDED, &[Phase::Evolution])
        .unwrap();
    before
        .add_stereotype("G.P_succ", EVIDENCE_PROVIDED, &[Phase::Evolution])
        .unwrap();
    let after = regenerate(&before, &common::robot_argument(&[]));
    assert!(after.has_stereotype("G.P_noOpOutside", DEFERRED_EVIDENCE));
    assert!(!after.has_stereotype("G.P_noOpOutside", EVIDENCE_PROVIDED));
    assert!(after.has_stereotype("G.P_succ", EVIDENCE_PROVIDED));
    assert!(validate_argument(&after).iter().all(|i| !i.is_error()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn any_generated_argument_validates(p_err in 0.0f64..0.2, dec in 5i64..40, thr in 0i64..60) {
        let arg = common::robot_argument(&[
            ("p_err", Value::Real(p_err)),
            ("batt_dec", Value::Int(dec)),
            ("batt_threshold", Value::Int(thr)),
        ]);
        let errs: Vec<_> = validate_argument(&arg).into_iter().filter(|i| i.is_error()).collect();
        prop_assert!(errs.is_empty(), "{:?}", errs);
        prop_assert_eq!(parse_dsl(&serialize_dsl(&arg)).unwrap(), arg.clone());
        let again = regenerate(&arg, &arg);
        prop_assert_eq!(serialize_dsl(&again), serialize_dsl(&arg));
    }
}
