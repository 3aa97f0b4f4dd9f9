#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeMap;
use std::path::PathBuf;

use contassure::model::{bind_constants, type_check, BoundModel, Value};
use contassure::parser::parse_model;

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn robot_source() -> String {
    std::fs::read_to_string(models_dir().join("inspection_robot.prism")).unwrap()
}

pub fn robot_props_source() -> String {
    std::fs::read_to_string(models_dir().join("inspection_robot.props")).unwrap()
}

pub fn bind_text(text: &str, overrides: &[(&str, Value)]) -> BoundModel {
    let ast = parse_model(text).unwrap();
    let typed = type_check(&ast).unwrap();
    let ov: BTreeMap<String, Value> = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    bind_constants(&typed, &ov).unwrap()
}

pub fn robot(overrides: &[(&str, Value)]) -> BoundModel {
    bind_text(&robot_source(), overrides)
}

use contassure::engine::{check_property, SolverConfig, VerificationResult};
use contassure::gsn::ArgumentModel;
use contassure::model::PropertySpec;
use contassure::parser::parse_properties;
use contassure::statespace::{build_state_space, fix_deadlocks, BuildConfig};
use contassure::transformer::{build_argument, ArgumentTemplate, ModelRef};

pub fn check_all(model: &BoundModel, props: &[PropertySpec]) -> Vec<VerificationResult> {
    let space = fix_deadlocks(build_state_space(model, &BuildConfig::default()).unwrap());
    props
        .iter()
        .map(|p| check_property(&space, p, &SolverConfig::default()).unwrap())
        .collect()
}

pub fn model_ref(model: &BoundModel) -> ModelRef {
    ModelRef {
        name: "inspection_robot".into(),
        path: "models/inspection_robot.prism".into(),
        fingerprint: model.fingerprint().to_string(),
    }
}

/// Argument generated from the robot model with the given overrides.
pub fn robot_argument(overrides: &[(&str, Value)]) -> ArgumentModel {
    let model = robot(overrides);
    let props = parse_properties(&robot_props_source()).unwrap();
    let results = check_all(&model, &props);
    build_argument(
        &model_ref(&model),
        &props,
        &results,
        &ArgumentTemplate::default(),
    )
    .unwrap()
}
