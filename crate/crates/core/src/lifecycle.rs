//! Runtime-evidence ingestion and evolution-time change management.
//!
//! All operations take an argument by reference and return a new one whose
//! version is incremented if anything changed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::VerificationResult;
use crate::gsn::names::*;
use crate::gsn::{
    ArgumentModel, ArtifactKind, GsnError, LinkKind, NodeKind, Phase, ROOT_ID, STRATEGY_ID,
};
use crate::transformer::{
    result_trace, solution_text, trace_value, ArgumentTemplate, TransformError,
};

/// Tolerance below which a re-checked value counts as unchanged.
pub const VALUE_CHANGE_TOLERANCE: f64 = 1e-6;

/// File name of the manifest inside an evolution package directory.
pub const MANIFEST_FILE: &str = "MANIFEST";

#[derive(Debug, Error)]
pub enum LifecycleError {
    #[error("monitor log line {line}: {message}")]
    MalformedEvent { line: usize, message: String },
    #[error("goal `{goal}`: confidence_threshold `{value}` is not a number")]
    BadThreshold { goal: String, value: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("no fresh result for property `{property}` of planned goal `{goal}`")]
    MissingResult { goal: String, property: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Gsn(#[from] GsnError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Violation,
    Confidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum EventValue {
    Score(f64),
    Detail(String),
}

/// One monitor record. On disk: tab-separated
/// `timestamp  monitor_id  kind  value  [payload]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorEvent {
    pub timestamp: String,
    pub monitor_id: String,
    pub kind: EventKind,
    pub value: EventValue,
    pub payload: Option<String>,
}

fn looks_like_iso8601(s: &str) -> bool {
    let b = s.as_bytes();
    let digits = |r: std::ops::Range<usize>| {
        r.into_iter()
            .all(|i| b.get(i).is_some_and(u8::is_ascii_digit))
    };
    digits(0..4)
        && b.get(4) == Some(&b'-')
        && digits(5..7)
        && b.get(7) == Some(&b'-')
        && digits(8..10)
        && (b.len() == 10 || b[10] == b'T' || b[10] == b' ')
}

impl MonitorEvent {
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, LifecycleError> {
        let bad = |message: String| LifecycleError::MalformedEvent {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.splitn(5, '\t').collect();
        if fields.len() < 4 {
            return Err(bad(format!(
                "expected at least 4 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let timestamp = fields[0].trim();
        if !looks_like_iso8601(timestamp) {
            return Err(bad(format!("`{timestamp}` is not an ISO-8601 timestamp")));
        }
        let monitor_id = fields[1].trim();
        if monitor_id.is_empty() {
            return Err(bad("empty monitor id".into()));
        }
        let kind = match fields[2].trim() {
            "violation" => EventKind::Violation,
            "confidence" => EventKind::Confidence,
            other => return Err(bad(format!("unknown event kind `{other}`"))),
        };
        let raw = fields[3].trim();
        let value = match kind {
            EventKind::Confidence => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| bad(format!("confidence `{raw}` is not a number")))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad(format!("confidence {v} outside [0,1]")));
                }
                EventValue::Score(v)
            }
            EventKind::Violation => EventValue::Detail(raw.to_string()),
        };
        let payload = fields
            .get(4)
            .map(|p| p.trim())
            .filter(|p| !p.is_empty())
            .map(str::to_string);
        Ok(MonitorEvent {
            timestamp: timestamp.to_string(),
            monitor_id: monitor_id.to_string(),
            kind,
            value,
            payload,
        })
    }

    pub fn to_line(&self) -> String {
        let kind = match self.kind {
            EventKind::Violation => "violation",
            EventKind::Confidence => "confidence",
        };
        let value = match &self.value {
            EventValue::Score(v) => v.to_string(),
            EventValue::Detail(d) => d.clone(),
        };
        let mut line = format!("{}\t{}\t{kind}\t{value}", self.timestamp, self.monitor_id);
        if let Some(p) = &self.payload {
            line.push('\t');
            line.push_str(p);
        }
        line
    }

    /// Reference stored in the `runtime_log` placeholder.
    fn log_reference(&self) -> String {
        match (&self.payload, &self.value) {
            (Some(p), _) => p.clone(),
            (None, EventValue::Detail(d)) if !d.is_empty() => format!("{} {}", self.timestamp, d),
            _ => self.timestamp.clone(),
        }
    }
}

/// Parses a monitor log; blank lines and `#` comments are skipped.
pub fn parse_monitor_log(text: &str) -> Result<Vec<MonitorEvent>, LifecycleError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| MonitorEvent::parse_line(l, i + 1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestOutcome {
    pub monitor_id: String,
    pub timestamp: String,
    pub goal: Option<String>,
    pub action: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub outcomes: Vec<IngestOutcome>,
    pub reopened: BTreeSet<String>,
    pub unmatched: usize,
}

/// Increments the argument version when a lifecycle step changed anything.
fn bump_if_changed(before: &ArgumentModel, mut after: ArgumentModel) -> ArgumentModel {
    if after != *before {
        after.version = before.version + 1;
    }
    after
}

/// Goals bound to a monitor through a `monitor_id` placeholder.
fn monitored_goals<'a>(arg: &'a ArgumentModel, monitor: &str) -> Vec<&'a str> {
    arg.annotations
        .iter()
        .filter(|a| a.placeholder_entry() == Some((MONITOR_ID, monitor)))
        .map(|a| a.node.as_str())
        .filter(|id| arg.node(id).is_some_and(|n| n.kind == NodeKind::Goal))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Applies monitor events to the goals carrying their `monitor_id`.
///
/// A violation reopens the goal and records a `runtime_log` placeholder. A
/// confidence score below the goal's `confidence_threshold` reopens it and
/// marks its evidence deferred, withdrawing `EvidenceProvided`. Events
/// without a matching goal are reported.
pub fn ingest_monitor_events(
    arg: &ArgumentModel,
    events: &[MonitorEvent],
) -> Result<(ArgumentModel, IngestReport), LifecycleError> {
    let mut out = arg.clone();
    let mut report = IngestReport::default();
    for ev in events {
        let goals: Vec<String> = monitored_goals(&out, &ev.monitor_id)
            .into_iter()
            .map(String::from)
            .collect();
        let outcome = |goal: Option<&str>, action: &str| IngestOutcome {
            monitor_id: ev.monitor_id.clone(),
            timestamp: ev.timestamp.clone(),
            goal: goal.map(String::from),
            action: action.to_string(),
        };
        if goals.is_empty() {
            report.unmatched += 1;
            report.outcomes.push(outcome(None, "unmatched"));
            continue;
        }
        for g in &goals {
            match &ev.value {
                EventValue::Detail(_) => {
                    out.add_stereotype(g, REOPENED, &[Phase::Runtime])?;
                    out.annotate(crate::gsn::Annotation::placeholder(
                        g,
                        RUNTIME_LOG,
                        &ev.log_reference(),
                        &[Phase::Runtime],
                    ))?;
                    report.reopened.insert(g.clone());
                    report
                        .outcomes
                        .push(outcome(Some(g), "reopened (violation)"));
                }
                EventValue::Score(score) => {
                    let Some(raw) = out.placeholder(g, CONFIDENCE_THRESHOLD) else {
                        report
                            .outcomes
                            .push(outcome(Some(g), "ignored (no confidence_threshold)"));
                        continue;
                    };
                    let threshold: f64 =
                        raw.trim()
                            .parse()
                            .map_err(|_| LifecycleError::BadThreshold {
                                goal: g.clone(),
                                value: raw.to_string(),
                            })?;
                    if *score < threshold {
                        out.add_stereotype(g, REOPENED, &[Phase::Runtime])?;
                        out.add_stereotype(g, DEFERRED_EVIDENCE, &[Phase::Runtime])?;
                        out.remove_stereotype(g, EVIDENCE_PROVIDED);
                        report.reopened.insert(g.clone());
                        report.outcomes.push(outcome(
                            Some(g),
                            &format!("reopened (confidence {score} < {threshold})"),
                        ));
                    } else {
                        report.outcomes.push(outcome(Some(g), "no change"));
                    }
                }
            }
        }
    }
    Ok((bump_if_changed(arg, out), report))
}

/// A changed artifact with its fingerprints before and after the change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactChange {
    pub artifact: ArtifactKind,
    pub reference: String,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvolutionPackage {
    pub changes: Vec<ArtifactChange>,
    pub logs: Vec<PathBuf>,
    pub notes: Vec<String>,
    pub reopened: Vec<String>,
}

impl EvolutionPackage {
    /// True when nothing in the package can trigger a change.
    pub fn is_empty(&self) -> bool {
        self.changes.is_empty()
            && self.logs.is_empty()
            && self.notes.is_empty()
            && self.reopened.is_empty()
    }

    /// Manifest lines:
    ///
    /// ```text
    /// changed <artifact-kind> <reference> <old-fp> <new-fp>
    /// log <path relative to the package>
    /// note <free text>
    /// reopen <goal-id>
    /// ```
    pub fn parse_manifest(text: &str) -> Result<Self, LifecycleError> {
        let mut pkg = EvolutionPackage::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| LifecycleError::Manifest {
                line: i + 1,
                message,
            };
            let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match word {
                "changed" => {
                    let f: Vec<&str> = rest.split_whitespace().collect();
                    if f.len() != 4 {
                        return Err(bad(
                            "expected `changed <kind> <reference> <old> <new>`".into()
                        ));
                    }
                    let artifact = ArtifactKind::from_str(f[0]).map_err(|e| bad(e.to_string()))?;
                    pkg.changes.push(ArtifactChange {
                        artifact,
                        reference: f[1].to_string(),
                        old: f[2].to_string(),
                        new: f[3].to_string(),
                    });
                }
                "log" if !rest.is_empty() => pkg.logs.push(PathBuf::from(rest)),
                "note" => pkg.notes.push(rest.to_string()),
                "reopen" if !rest.is_empty() && !rest.contains(char::is_whitespace) => {
                    pkg.reopened.push(rest.to_string())
                }
                "log" | "reopen" => {
                    return Err(bad(format!("`{word}` needs exactly one argument")))
                }
                other => return Err(bad(format!("unknown entry `{other}`"))),
            }
        }
        Ok(pkg)
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for c in &self.changes {
            out += &format!(
                "changed {} {} {} {}\n",
                c.artifact, c.reference, c.old, c.new
            );
        }
        for l in &self.logs {
            out += &format!("log {}\n", l.display());
        }
        for n in &self.notes {
            out += &format!("note {n}\n");
        }
        for r in &self.reopened {
            out += &format!("reopen {r}\n");
        }
        out
    }

    /// Reads `MANIFEST` from a package directory; log paths are resolved
    /// against the directory.
    pub fn load(dir: &Path) -> Result<Self, LifecycleError> {
        let path = dir.join(MANIFEST_FILE);
        let text =
            std::fs::read_to_string(&path).map_err(|source| LifecycleError::Io { path, source })?;
        let mut pkg = Self::parse_manifest(&text)?;
        for l in &mut pkg.logs {
            if l.is_relative() {
                *l = dir.join(&*l);
            }
        }
        Ok(pkg)
    }

    /// Monitor events of every log listed in the package.
    pub fn events(&self) -> Result<Vec<MonitorEvent>, LifecycleError> {
        let mut all = Vec::new();
        for path in &self.logs {
            let text = std::fs::read_to_string(path).map_err(|source| LifecycleError::Io {
                path: path.clone(),
                source,
            })?;
            all.extend(parse_monitor_log(&text)?);
        }
        Ok(all)
    }
}

/// Changes between the fingerprints recorded in `arg` and the current ones:
/// model file paths mapped to their fingerprint, properties by name.
pub fn detect_changes(
    arg: &ArgumentModel,
    models: &BTreeMap<String, String>,
    properties: &BTreeMap<String, String>,
) -> Vec<ArtifactChange> {
    let mut out = Vec::new();
    for t in &arg.traces {
        let current = match t.artifact {
            ArtifactKind::ModelFile => models.get(&t.reference),
            ArtifactKind::Property => properties.get(&t.reference),
            _ => None,
        };
        if let (Some(old), Some(new)) = (&t.fingerprint, current) {
            let change = ArtifactChange {
                artifact: t.artifact,
                reference: t.reference.clone(),
                old: old.clone(),
                new: new.clone(),
            };
            if old != new && !out.contains(&change) {
                out.push(change);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpactClass {
    Valid,
    Uncertain,
    Invalid,
}

impl fmt::Display for ImpactClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImpactClass::Valid => "valid",
            ImpactClass::Uncertain => "uncertain",
            ImpactClass::Invalid => "invalid",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalImpact {
    pub goal: String,
    pub class: ImpactClass,
    pub rationale: String,
    /// Carries `DeferredEvidence` or `deferred=true`.
    pub undischarged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    /// One entry per goal, in id order.
    pub goals: Vec<GoalImpact>,
    pub summary: String,
}

impl ImpactReport {
    pub fn count(&self, class: ImpactClass) -> usize {
        self.goals.iter().filter(|g| g.class == class).count()
    }

    pub fn class_of(&self, goal: &str) -> Option<ImpactClass> {
        self.goals.iter().find(|g| g.goal == goal).map(|g| g.class)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.summary);
        for g in &self.goals {
            out += &format!("{}\t{}\t{}\n", g.goal, g.class, g.rationale);
        }
        out
    }
}

fn same_reference(kind: ArtifactKind, a: &str, b: &str) -> bool {
    if a == b {
        return true;
    }
    kind == ArtifactKind::ModelFile
        && Path::new(a)
            .file_name()
            .is_some_and(|n| Some(n) == Path::new(b).file_name())
}

/// Supporting solutions of a goal.
fn solutions<'a>(arg: &'a ArgumentModel, goal: &'a str) -> Vec<&'a str> {
    arg.targets(goal, LinkKind::SupportedBy)
        .filter(|t| arg.node(t).is_some_and(|n| n.kind == NodeKind::Solution))
        .collect()
}

/// Goals below `goal` through supported-by links, excluding itself.
fn descendant_goals(arg: &ArgumentModel, goal: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![goal.to_string()];
    while let Some(id) = stack.pop() {
        for t in arg.targets(&id, LinkKind::SupportedBy) {
            if seen.insert(t.to_string()) {
                stack.push(t.to_string());
            }
        }
    }
    seen.into_iter()
        .filter(|id| id != goal && arg.node(id).is_some_and(|n| n.kind == NodeKind::Goal))
        .collect()
}

fn ancestors(arg: &ArgumentModel, id: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![id.to_string()];
    while let Some(cur) = stack.pop() {
        for l in arg
            .links
            .iter()
            .filter(|l| l.kind == LinkKind::SupportedBy && l.target == cur)
        {
            if seen.insert(l.source.clone()) {
                stack.push(l.source.clone());
            }
        }
    }
    seen
}

/// Name of the property a goal argues over, from its property trace or the
/// result traces of its solutions.
pub fn goal_property(arg: &ArgumentModel, goal: &str) -> Option<String> {
    if let Some(t) = arg
        .traces_of(goal)
        .find(|t| t.artifact == ArtifactKind::Property)
    {
        return Some(t.reference.clone());
    }
    solutions(arg, goal).into_iter().find_map(|s| {
        arg.traces_of(s)
            .find(|t| t.artifact == ArtifactKind::VerificationResult)
            .map(|t| t.reference.clone())
    })
}

fn value_changed(old: &str, new: &str) -> bool {
    match (old.parse::<f64>(), new.parse::<f64>()) {
        (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a - b).abs() > VALUE_CHANGE_TOLERANCE,
        _ => old != new,
    }
}

fn is_undischarged(arg: &ArgumentModel, goal: &str) -> bool {
    arg.has_stereotype(goal, DEFERRED_EVIDENCE) || arg.placeholder(goal, DEFERRED) == Some("true")
}

/// Classifies every goal against an evolution package.
///
/// A goal is invalid when it was reopened by a monitor violation, or when
/// an artifact it is traced to changed and a fresh result for its property
/// differs from the recorded one. It is uncertain when a traced artifact
/// changed and no fresh result covers it, when a confidence drop reopened
/// it, or when the package reopens it. Goals with sub-goals take the worst
/// class of their descendants. The top-level strategy receives the
/// `ImpactAnalysis` stereotype and an `impact_summary` placeholder.
pub fn impact_analysis(
    arg: &ArgumentModel,
    pkg: &EvolutionPackage,
    fresh: Option<&[VerificationResult]>,
) -> Result<(ImpactReport, ArgumentModel), LifecycleError> {
    let fresh_by_name: Option<BTreeMap<&str, &VerificationResult>> =
        fresh.map(|rs| rs.iter().map(|r| (r.name.as_str(), r)).collect());
    let mut direct: BTreeMap<String, (ImpactClass, Vec<String>)> = BTreeMap::new();

    for g in arg.goals() {
        let id = g.id.as_str();
        let mut reasons = Vec::new();
        let mut class = ImpactClass::Valid;

        let mut linked: Vec<&str> = vec![id];
        linked.extend(solutions(arg, id));
        let ups = ancestors(arg, id);
        linked.extend(ups.iter().map(String::as_str));
        let changed: Vec<&ArtifactChange> = pkg
            .changes
            .iter()
            .filter(|c| {
                linked.iter().any(|n| {
                    arg.traces_of(n).any(|t| {
                        t.artifact == c.artifact
                            && same_reference(c.artifact, &t.reference, &c.reference)
                    })
                })
            })
            .collect();

        if !changed.is_empty() {
            let what: Vec<String> = changed
                .iter()
                .map(|c| format!("{} {}", c.artifact, c.reference))
                .collect();
            let what = what.join(", ");
            let property = goal_property(arg, id);
            let recheck = match (&fresh_by_name, &property) {
                (Some(m), Some(p)) => m.get(p.as_str()).copied().map(Some),
                (Some(_), None) => Some(None),
                (None, _) => None,
            };
            match recheck {
                None => {
                    class = ImpactClass::Uncertain;
                    reasons.push(format!("{what} changed; not re-checked"));
                }
                Some(None) => reasons.push(format!("{what} changed; assessed through sub-goals")),
                Some(Some(r)) => {
                    let new = trace_value(r);
                    let old = solutions(arg, id).into_iter().find_map(|s| {
                        arg.traces_of(s)
                            .find(|t| t.artifact == ArtifactKind::VerificationResult)
                            .and_then(|t| t.value.clone())
                    });
                    match old {
                        Some(old) if value_changed(&old, &new) => {
                            class = ImpactClass::Invalid;
                            reasons.push(format!("{what} changed; result {old} -> {new}"));
                        }
                        Some(_) => reasons.push(format!("{what} changed; re-check confirms {new}")),
                        None => {
                            class = ImpactClass::Invalid;
                            reasons.push(format!(
                                "{what} changed; no recorded result to compare with {new}"
                            ));
                        }
                    }
                }
            }
        }

        if arg.has_stereotype(id, REOPENED) {
            if arg.placeholder(id, RUNTIME_LOG).is_some() {
                class = ImpactClass::Invalid;
                reasons.push("reopened by a monitor violation".into());
            } else {
                class = class.max(ImpactClass::Uncertain);
                reasons.push("reopened by a confidence drop".into());
            }
        }
        if pkg.reopened.iter().any(|r| r == id) {
            class = class.max(ImpactClass::Uncertain);
            reasons.push("reopened by the evolution package".into());
        }
        direct.insert(id.to_string(), (class, reasons));
    }

    let mut goals = Vec::new();
    for (id, (own, reasons)) in &direct {
        let mut class = *own;
        let mut reasons = reasons.clone();
        let worst_below = descendant_goals(arg, id)
            .iter()
            .filter_map(|d| direct.get(d).map(|(c, _)| *c))
            .max();
        if let Some(w) = worst_below.filter(|w| *w > ImpactClass::Valid) {
            if w > class {
                class = w;
            }
            reasons.push(format!("a sub-goal is {w}"));
        }
        if reasons.is_empty() {
            reasons.push("unaffected".into());
        }
        goals.push(GoalImpact {
            goal: id.clone(),
            class,
            rationale: reasons.join("; "),
            undischarged: is_undischarged(arg, id),
        });
    }

    let count = |c: ImpactClass| goals.iter().filter(|g| g.class == c).count();
    let summary = format!(
        "invalid={} uncertain={} valid={}",
        count(ImpactClass::Invalid),
        count(ImpactClass::Uncertain),
        count(ImpactClass::Valid)
    );
    let mut out = arg.clone();
    let anchor = if out.node(STRATEGY_ID).is_some() {
        STRATEGY_ID
    } else {
        ROOT_ID
    };
    if out.node(anchor).is_some() {
        out.add_stereotype(anchor, IMPACT_ANALYSIS, &[Phase::Evolution])?;
        out.set_placeholder(anchor, IMPACT_SUMMARY, &summary, &[Phase::Evolution])?;
    }
    Ok((ImpactReport { goals, summary }, bump_if_changed(arg, out)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStrategy {
    ReVerify,
    Simulate,
    ManualReview,
}

impl fmt::Display for PlanStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanStrategy::ReVerify => "re-verify",
            PlanStrategy::Simulate => "simulate",
            PlanStrategy::ManualReview => "manual-review",
        })
    }
}

impl FromStr for PlanStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "re-verify" | "reverify" | "proof" => Ok(PlanStrategy::ReVerify),
            "simulate" | "simulation" => Ok(PlanStrategy::Simulate),
            "manual-review" | "manual" => Ok(PlanStrategy::ManualReview),
            other => Err(format!("unknown regeneration strategy `{other}`")),
        }
    }
}

/// Parses an `evidence_cost` value of the form `<number>h` or `<number>d`
/// into hours.
pub fn parse_cost(text: &str) -> Option<f64> {
    let t = text.trim();
    let (num, per) = match t.char_indices().last()? {
        (i, 'h') => (&t[..i], 1.0),
        (i, 'd') => (&t[..i], 24.0),
        _ => return None,
    };
    let n: f64 = num.trim().parse().ok()?;
    (n.is_finite() && n >= 0.0).then_some(n * per)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationPlanEntry {
    pub goal: String,
    pub strategy: PlanStrategy,
    pub rank: usize,
    pub class: ImpactClass,
    /// Parsed `evidence_cost` in hours.
    pub cost_hours: Option<f64>,
    pub critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationPlan {
    pub entries: Vec<RegenerationPlanEntry>,
    pub warnings: Vec<String>,
}

impl RegenerationPlan {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let cost = e.cost_hours.map_or("-".to_string(), |h| format!("{h}h"));
            let crit = if e.critical { "\tsafety-critical" } else { "" };
            out += &format!(
                "{}\t{}\t{}\t{}\t{cost}{crit}\n",
                e.rank, e.goal, e.strategy, e.class
            );
        }
        out
    }
}

/// Orders invalid and uncertain goals for evidence regeneration: invalid
/// first, then by ascending `evidence_cost` (missing last), then by id.
/// Each planned goal gains the `RegenerationPlan` stereotype and a
/// `regeneration_plan` placeholder naming its strategy.
pub fn plan_regeneration(
    report: &ImpactReport,
    arg: &ArgumentModel,
) -> Result<(RegenerationPlan, ArgumentModel), LifecycleError> {
    let mut warnings = Vec::new();
    let mut entries = Vec::new();
    for g in report
        .goals
        .iter()
        .filter(|g| g.class != ImpactClass::Valid)
    {
        let id = g.goal.as_str();
        if arg.node(id).is_none() {
            warnings.push(format!("{id}: goal not in argument, skipped"));
            continue;
        }
        let cost_hours = match arg.placeholder(id, EVIDENCE_COST) {
            None => None,
            Some(raw) => {
                let c = parse_cost(raw);
                if c.is_none() {
                    warnings.push(format!(
                        "{id}: evidence_cost `{raw}` not understood, treated as missing"
                    ));
                }
                c
            }
        };
        let external = arg
            .traces_of(id)
            .any(|t| t.artifact == ArtifactKind::ExternalEvidence);
        let strategy = match arg
            .placeholder(id, REGENERATION_PLAN_KEY)
            .map(PlanStrategy::from_str)
        {
            Some(Ok(s)) => s,
            Some(Err(e)) => {
                warnings.push(format!("{id}: {e}, using default"));
                default_strategy(external)
            }
            None => default_strategy(external),
        };
        entries.push(RegenerationPlanEntry {
            goal: id.to_string(),
            strategy,
            rank: 0,
            class: g.class,
            cost_hours,
            critical: arg.placeholder(id, SAFETY_CRITICAL) == Some("true"),
        });
    }
    entries.sort_by(|a, b| {
        b.class
            .cmp(&a.class)
            .then_with(|| match (a.cost_hours, b.cost_hours) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => std::cmp::Ordering::Equal,
            })
            .then_with(|| a.goal.cmp(&b.goal))
    });
    let mut out = arg.clone();
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
        out.add_stereotype(&e.goal, REGENERATION_PLAN, &[Phase::Evolution])?;
        out.set_placeholder(
            &e.goal,
            REGENERATION_PLAN_KEY,
            &e.strategy.to_string(),
            &[Phase::Evolution],
        )?;
    }
    Ok((
        RegenerationPlan { entries, warnings },
        bump_if_changed(arg, out),
    ))
}

fn default_strategy(external: bool) -> PlanStrategy {
    if external {
        PlanStrategy::ManualReview
    } else {
        PlanStrategy::ReVerify
    }
}

fn discharges(r: &VerificationResult) -> bool {
    r.verdict != Some(false) && !r.marginal
}

/// Applies fresh results to the re-verify entries of a plan.
///
/// Each regenerated goal gets updated solution text and result trace
/// links, loses `Reopened` and its plan markers, and has its version
/// incremented. A passing result replaces `DeferredEvidence` (and
/// `deferred=true`) with `EvidenceProvided`; a failing one keeps the
/// evidence deferred. Goals without a property of their own are refreshed
/// without evidence changes. Entries with other strategies are left for
/// manual follow-up. Trace links still recording the old fingerprint of a
/// changed artifact are moved to the new one.
pub fn apply_regeneration(
    arg: &ArgumentModel,
    plan: &RegenerationPlan,
    fresh: &[VerificationResult],
    tmpl: &ArgumentTemplate,
    changes: &[ArtifactChange],
) -> Result<ArgumentModel, LifecycleError> {
    let by_name: BTreeMap<&str, &VerificationResult> =
        fresh.iter().map(|r| (r.name.as_str(), r)).collect();
    let mut out = arg.clone();
    for e in plan
        .entries
        .iter()
        .filter(|e| e.strategy == PlanStrategy::ReVerify)
    {
        let goal = e.goal.as_str();
        if out.node(goal).is_none() {
            return Err(GsnError::UnknownNode(goal.to_string()).into());
        }
        if let Some(property) = goal_property(&out, goal) {
            let r =
                *by_name
                    .get(property.as_str())
                    .ok_or_else(|| LifecycleError::MissingResult {
                        goal: goal.to_string(),
                        property: property.clone(),
                    })?;
            let sols: Vec<String> = solutions(&out, goal)
                .into_iter()
                .map(String::from)
                .collect();
            for s in &sols {
                let text = solution_text(tmpl, &out.name, r)?;
                let trace = result_trace(s, r);
                let old_traces: Vec<_> = out
                    .traces_of(s)
                    .filter(|t| t.artifact == ArtifactKind::VerificationResult)
                    .cloned()
                    .collect();
                let node = out.nodes.get_mut(s.as_str()).expect("solution exists");
                if node.description != text || old_traces != [trace.clone()] {
                    node.description = text;
                    node.version += 1;
                    out.traces.retain(|t| {
                        !(t.node == *s && t.artifact == ArtifactKind::VerificationResult)
                    });
                    out.traces.push(trace);
                }
            }
            if discharges(r) {
                out.remove_stereotype(goal, DEFERRED_EVIDENCE);
                if out.placeholder(goal, DEFERRED) == Some("true") {
                    out.remove_placeholder(goal, DEFERRED);
                }
                out.add_stereotype(goal, EVIDENCE_PROVIDED, &[Phase::Evolution])?;
            } else {
                out.remove_stereotype(goal, EVIDENCE_PROVIDED);
                out.add_stereotype(goal, DEFERRED_EVIDENCE, &[Phase::Evolution])?;
            }
        }
        out.remove_stereotype(goal, REOPENED);
        out.remove_stereotype(goal, REGENERATION_PLAN);
        out.remove_placeholder(goal, REGENERATION_PLAN_KEY);
        out.nodes.get_mut(goal).expect("goal exists").version += 1;
    }
    for t in &mut out.traces {
        if let Some(c) = changes.iter().find(|c| {
            c.artifact == t.artifact
                && same_reference(c.artifact, &t.reference, &c.reference)
                && t.fingerprint.as_deref() == Some(c.old.as_str())
        }) {
            t.fingerprint = Some(c.new.clone());
        }
    }
    Ok(bump_if_changed(arg, out))
}

/// Goals breaking the stereotype state machine: holding both
/// `DeferredEvidence` and `EvidenceProvided`, or `EvidenceProvided` while
/// still `Reopened`.
pub fn state_machine_violations(arg: &ArgumentModel) -> Vec<String> {
    arg.goals()
        .filter(|g| {
            let provided = arg.has_stereotype(&g.id, EVIDENCE_PROVIDED);
            provided
                && (arg.has_stereotype(&g.id, DEFERRED_EVIDENCE)
                    || arg.has_stereotype(&g.id, REOPENED))
        })
        .map(|g| g.id.clone())
        .collect()
}
