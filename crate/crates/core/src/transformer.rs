//! Verification results to GSN argument, and regeneration of an existing
//! argument from fresh results.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::engine::{ResultKind, VerificationResult};
use crate::gsn::names::DEFERRED_EVIDENCE;
use crate::gsn::{
    context_id, goal_id, merge_annotations, serialize_dsl, solution_id, Annotation, ArgumentModel,
    ArtifactKind, GsnError, LinkKind, NodeKind, Phase, TraceLink, ROOT_ID, STRATEGY_ID,
};
use crate::hash::sha256_hex;
use crate::model::PropertySpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("no verification result for property `{0}`")]
    MissingResult(String),
    #[error("verification result `{0}` matches no property")]
    UnexpectedResult(String),
    #[error("property `{0}` is defined more than once")]
    DuplicateProperty(String),
    #[error("template `{template}`: unresolved variable `{{{variable}}}`")]
    UnresolvedVariable { template: String, variable: String },
    #[error("template `{template}`: {message}")]
    BadTemplate { template: String, message: String },
    #[error(transparent)]
    Gsn(#[from] GsnError),
}

/// Description templates. Variables: `{model}` everywhere; `{property}`
/// and `{formula}` in the per-property templates; `{result}` in the
/// solution template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgumentTemplate {
    pub root: String,
    pub strategy: String,
    pub goal: String,
    pub context: String,
    pub solution: String,
}

impl Default for ArgumentTemplate {
    fn default() -> Self {
        ArgumentTemplate {
            root: "Model {model} satisfies all of its specified properties".into(),
            strategy: "Argument over each verified property of {model}".into(),
            goal: "Property {property} holds for model {model}".into(),
            context: "{formula}".into(),
            solution: "Verification result for {property}: {result}".into(),
        }
    }
}

impl ArgumentTemplate {
    /// Reads `key = text` lines (`root`, `strategy`, `goal`, `context`,
    /// `solution`); missing keys keep their defaults, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, TransformError> {
        let mut t = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| TransformError::BadTemplate {
                template: format!("line {}", n + 1),
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad("expected `key = text`".into()))?;
            let slot = match k.trim() {
                "root" => &mut t.root,
                "strategy" => &mut t.strategy,
                "goal" => &mut t.goal,
                "context" => &mut t.context,
                "solution" => &mut t.solution,
                other => return Err(bad(format!("unknown template `{other}`"))),
            };
            *slot = v.trim().to_string();
        }
        Ok(t)
    }

    /// Fails if any template uses a variable it cannot resolve.
    pub fn check(&self) -> Result<(), TransformError> {
        let vars = |names: &[&str]| -> HashMap<&'static str, String> {
            ["model", "property", "formula", "result"]
                .into_iter()
                .filter(|n| names.contains(n))
                .map(|n| (n, String::new()))
                .collect()
        };
        render("root", &self.root, &vars(&["model"]))?;
        render("strategy", &self.strategy, &vars(&["model"]))?;
        render("goal", &self.goal, &vars(&["model", "property", "formula"]))?;
        render(
            "context",
            &self.context,
            &vars(&["model", "property", "formula"]),
        )?;
        render(
            "solution",
            &self.solution,
            &vars(&["model", "property", "formula", "result"]),
        )?;
        Ok(())
    }
}

/// Substitutes `{name}` variables; `{{` and `}}` stand for literal braces.
fn render(
    template: &str,
    text: &str,
    vars: &HashMap<&'static str, String>,
) -> Result<String, TransformError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find(['{', '}']) {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if tail.starts_with("{{") || tail.starts_with("}}") {
            out.push_str(&tail[..1]);
            rest = &tail[2..];
            continue;
        }
        if tail.starts_with('}') {
            return Err(TransformError::BadTemplate {
                template: template.into(),
                message: "unmatched `}`".into(),
            });
        }
        let end = tail.find('}').ok_or_else(|| TransformError::BadTemplate {
            template: template.into(),
            message: "unterminated `{`".into(),
        })?;
        let name = &tail[1..end];
        let value = vars
            .get(name)
            .ok_or_else(|| TransformError::UnresolvedVariable {
                template: template.into(),
                variable: name.into(),
            })?;
        out.push_str(value);
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// The verified model as seen by the argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRef {
    /// Display name, also used as the argument name.
    pub name: String,
    /// Path recorded in the root's trace link.
    pub path: String,
    /// Content fingerprint of the model and its constant values.
    pub fingerprint: String,
}

pub fn property_fingerprint(prop: &PropertySpec) -> String {
    sha256_hex(prop.formula_text())
}

/// Solution text for a result: verdicts as holds/violated (with the
/// probability when one was computed), values to six significant digits.
pub fn render_result(r: &VerificationResult) -> String {
    match (r.verdict, r.value) {
        (Some(v), value) => {
            let word = if v { "holds" } else { "violated" };
            match (value, r.marginal) {
                (Some(x), false) => format!("{word} ({x})"),
                (Some(x), true) => format!("{word} ({x}, marginal)"),
                (None, _) => word.to_string(),
            }
        }
        (None, Some(v)) => v.to_string(),
        (None, None) => "unknown".into(),
    }
}

/// Value recorded on a verification-result trace link.
pub fn trace_value(r: &VerificationResult) -> String {
    match (r.kind, r.verdict, r.value) {
        (ResultKind::Boolean, Some(v), _) => v.to_string(),
        (_, _, Some(v)) => v.exact_text(),
        _ => String::new(),
    }
}

pub fn result_trace(node: &str, r: &VerificationResult) -> TraceLink {
    let mut t = TraceLink::new(
        node,
        ArtifactKind::VerificationResult,
        &r.name,
        Some(r.fingerprint.clone()),
    );
    t.value = Some(trace_value(r));
    t
}

/// Solution description for a result under a template.
pub fn solution_text(
    tmpl: &ArgumentTemplate,
    model: &str,
    r: &VerificationResult,
) -> Result<String, TransformError> {
    let vars = HashMap::from([
        ("model", model.to_string()),
        ("property", r.name.clone()),
        ("formula", r.formula.clone()),
        ("result", render_result(r)),
    ]);
    render("solution", &tmpl.solution, &vars)
}

fn needs_deferral(r: &VerificationResult) -> bool {
    r.verdict == Some(false) || r.marginal
}

pub fn build_argument(
    model: &ModelRef,
    props: &[PropertySpec],
    results: &[VerificationResult],
    tmpl: &ArgumentTemplate,
) -> Result<ArgumentModel, TransformError> {
    let mut by_name: BTreeMap<&str, &VerificationResult> = BTreeMap::new();
    for r in results {
        by_name.insert(&r.name, r);
    }
    let mut seen = std::collections::HashSet::new();
    for p in props {
        if !seen.insert(p.name.as_str()) {
            return Err(TransformError::DuplicateProperty(p.name.clone()));
        }
        if !by_name.contains_key(p.name.as_str()) {
            return Err(TransformError::MissingResult(p.name.clone()));
        }
    }
    if let Some(extra) = results.iter().find(|r| !seen.contains(r.name.as_str())) {
        return Err(TransformError::UnexpectedResult(extra.name.clone()));
    }

    let model_vars = HashMap::from([("model", model.name.clone())]);
    let mut arg = ArgumentModel::new(&model.name);
    arg.add_node(
        ROOT_ID,
        NodeKind::Goal,
        &render("root", &tmpl.root, &model_vars)?,
    )?;
    arg.add_node(
        STRATEGY_ID,
        NodeKind::Strategy,
        &render("strategy", &tmpl.strategy, &model_vars)?,
    )?;
    arg.link(LinkKind::SupportedBy, ROOT_ID, STRATEGY_ID);
    arg.add_trace(TraceLink::new(
        ROOT_ID,
        ArtifactKind::ModelFile,
        &model.path,
        Some(model.fingerprint.clone()),
    ))?;

    for p in props {
        let r = by_name[p.name.as_str()];
        let (g, c, e) = (goal_id(&p.name), context_id(&p.name), solution_id(&p.name));
        let vars = HashMap::from([
            ("model", model.name.clone()),
            ("property", p.name.clone()),
            ("formula", p.formula_text()),
        ]);
        arg.add_node(&g, NodeKind::Goal, &render("goal", &tmpl.goal, &vars)?)?;
        arg.add_node(
            &c,
            NodeKind::Context,
            &render("context", &tmpl.context, &vars)?,
        )?;
        arg.add_node(
            &e,
            NodeKind::Solution,
            &solution_text(tmpl, &model.name, r)?,
        )?;
        arg.link(LinkKind::SupportedBy, STRATEGY_ID, &g);
        arg.link(LinkKind::InContextOf, &g, &c);
        arg.link(LinkKind::SupportedBy, &g, &e);
        arg.add_trace(TraceLink::new(
            &g,
            ArtifactKind::Property,
            &p.name,
            Some(property_fingerprint(p)),
        ))?;
        arg.add_trace(result_trace(&e, r))?;
        if needs_deferral(r) {
            let mut a = Annotation::stereotype(&g, DEFERRED_EVIDENCE, &[Phase::Design]);
            a.generated = true;
            arg.annotate(a)?;
        }
    }
    Ok(arg)
}

/// Own trace links of a node that carry fingerprints.
fn tracked(arg: &ArgumentModel, id: &str) -> Vec<TraceLink> {
    arg.traces_of(id)
        .filter(|t| t.artifact != ArtifactKind::ExternalEvidence)
        .cloned()
        .collect()
}

/// Merges `previous` annotations into `fresh` and assigns versions: a node
/// present in both keeps its version unless its kind, description or own
/// fingerprinted trace links changed, or (for goals) a supporting solution
/// changed, in which case it is incremented. New nodes start at version 1.
/// The argument version is incremented whenever the result differs from
/// `previous`.
pub fn regenerate(previous: &ArgumentModel, fresh: &ArgumentModel) -> ArgumentModel {
    let mut out = merge_annotations(fresh, previous);
    let changed: BTreeMap<String, bool> = out
        .nodes
        .values()
        .map(|n| {
            let differs = match previous.node(&n.id) {
                None => true,
                Some(p) => {
                    p.kind != n.kind
                        || p.description != n.description
                        || tracked(previous, &n.id) != tracked(&out, &n.id)
                }
            };
            (n.id.clone(), differs)
        })
        .collect();
    let ids: Vec<String> = out.nodes.keys().cloned().collect();
    for id in ids {
        let own = changed[&id];
        let via_solution = out.nodes[&id].kind == NodeKind::Goal
            && out
                .targets(&id, LinkKind::SupportedBy)
                .any(|t| out.node(t).is_some_and(|n| n.kind == NodeKind::Solution) && changed[t]);
        let version = match previous.node(&id) {
            None => 1,
            Some(p) if own || via_solution => p.version + 1,
            Some(p) => p.version,
        };
        out.nodes.get_mut(&id).unwrap().version = version;
    }
    out.version = previous.version;
    if serialize_dsl(&out) != serialize_dsl(previous) {
        out.version = previous.version + 1;
    }
    out
}

/// Links a node to evidence produced outside the tool chain, such as a
/// refinement assertion name. No fingerprint is tracked.
pub fn attach_external_evidence(
    arg: &ArgumentModel,
    node: &str,
    reference: &str,
) -> Result<ArgumentModel, GsnError> {
    let mut out = arg.clone();
    out.add_trace(TraceLink::new(
        node,
        ArtifactKind::ExternalEvidence,
        reference,
        None,
    ))?;
    Ok(out)
}
