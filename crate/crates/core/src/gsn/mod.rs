//! GSN argument model with placeholder and stereotype annotations, trace
//! links to verification artifacts, a text format and a DOT export.

mod dot;
mod dsl;
mod merge;
mod validate;
mod vocabulary;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use dot::export_dot;
pub use dsl::{parse_dsl, serialize_dsl, DslError};
pub use merge::merge_annotations;
pub use validate::{validate_argument, validate_with, Issue};
pub use vocabulary::{Vocabulary, VocabularyEntry};

pub const ROOT_ID: &str = "G.root";
pub const STRATEGY_ID: &str = "S.byProperty";

/// Stereotype and placeholder names used by the tools themselves.
pub mod names {
    pub const DEFERRED_EVIDENCE: &str = "DeferredEvidence";
    pub const EVIDENCE_PROVIDED: &str = "EvidenceProvided";
    pub const REOPENED: &str = "Reopened";
    pub const REGENERATION_PLAN: &str = "RegenerationPlan";
    pub const IMPACT_ANALYSIS: &str = "ImpactAnalysis";
    pub const MONITOR_ID: &str = "monitor_id";
    pub const DEFERRED: &str = "deferred";
    pub const CONFIDENCE_THRESHOLD: &str = "confidence_threshold";
    pub const EVIDENCE_COST: &str = "evidence_cost";
    pub const EVOLUTION_PACKAGE: &str = "evolution_package";
    pub const IMPACT_SUMMARY: &str = "impact_summary";
    pub const REGENERATION_PLAN_KEY: &str = "regeneration_plan";
    pub const RUNTIME_LOG: &str = "runtime_log";
    pub const SAFETY_CRITICAL: &str = "safety_critical";
}

pub fn goal_id(property: &str) -> String {
    format!("G.{property}")
}

pub fn context_id(property: &str) -> String {
    format!("C.{property}")
}

pub fn solution_id(property: &str) -> String {
    format!("E.{property}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Goal,
    Strategy,
    Solution,
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkKind {
    SupportedBy,
    InContextOf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Design,
    Runtime,
    Evolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArtifactKind {
    ModelFile,
    Property,
    VerificationResult,
    ExternalEvidence,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $text:literal),* $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($ty::$variant => $text),*
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl serde::Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($ty::$variant),)*
                    other => Err(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        stringify!($ty),
                        [$($text),*].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(NodeKind {
    Goal => "goal",
    Strategy => "strategy",
    Solution => "solution",
    Context => "context",
});
keyword_enum!(LinkKind {
    SupportedBy => "supported-by",
    InContextOf => "in-context-of",
});
keyword_enum!(Phase {
    Design => "design",
    Runtime => "runtime",
    Evolution => "evolution",
});
keyword_enum!(ArtifactKind {
    ModelFile => "model-file",
    Property => "property",
    VerificationResult => "verification-result",
    ExternalEvidence => "external-evidence",
});

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GsnNode {
    pub id: String,
    pub kind: NodeKind,
    pub description: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GsnLink {
    pub kind: LinkKind,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AnnotationBody {
    Placeholder { key: String, value: String },
    Stereotype(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub node: String,
    pub body: AnnotationBody,
    /// Sorted, without duplicates. Empty means "not stated".
    pub phases: Vec<Phase>,
    /// Produced by the transformer and recomputed on every regeneration,
    /// as opposed to inserted by hand or by a lifecycle operation.
    pub generated: bool,
}

impl Annotation {
    pub fn stereotype(node: &str, name: &str, phases: &[Phase]) -> Self {
        Annotation {
            node: node.to_string(),
            body: AnnotationBody::Stereotype(name.to_string()),
            phases: normalize_phases(phases),
            generated: false,
        }
    }

    pub fn placeholder(node: &str, key: &str, value: &str, phases: &[Phase]) -> Self {
        Annotation {
            node: node.to_string(),
            body: AnnotationBody::Placeholder {
                key: key.to_string(),
                value: value.to_string(),
            },
            phases: normalize_phases(phases),
            generated: false,
        }
    }

    pub fn stereotype_name(&self) -> Option<&str> {
        match &self.body {
            AnnotationBody::Stereotype(s) => Some(s),
            AnnotationBody::Placeholder { .. } => None,
        }
    }

    pub fn placeholder_entry(&self) -> Option<(&str, &str)> {
        match &self.body {
            AnnotationBody::Placeholder { key, value } => Some((key, value)),
            AnnotationBody::Stereotype(_) => None,
        }
    }
}

pub(crate) fn normalize_phases(phases: &[Phase]) -> Vec<Phase> {
    let set: BTreeSet<Phase> = phases.iter().copied().collect();
    set.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceLink {
    pub node: String,
    pub artifact: ArtifactKind,
    /// Property name, file path, or external evidence name.
    pub reference: String,
    pub fingerprint: Option<String>,
    /// Full-precision result value recorded with verification-result links.
    pub value: Option<String>,
}

impl TraceLink {
    pub fn new(
        node: &str,
        artifact: ArtifactKind,
        reference: &str,
        fingerprint: Option<String>,
    ) -> Self {
        TraceLink {
            node: node.to_string(),
            artifact,
            reference: reference.to_string(),
            fingerprint,
            value: None,
        }
    }
}

/// Annotations and trace links whose node no longer exists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Quarantine {
    pub annotations: Vec<Annotation>,
    pub traces: Vec<TraceLink>,
}

impl Quarantine {
    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty() && self.traces.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GsnError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgumentModel {
    pub name: String,
    pub version: u32,
    pub nodes: BTreeMap<String, GsnNode>,
    pub links: BTreeSet<GsnLink>,
    pub annotations: Vec<Annotation>,
    pub traces: Vec<TraceLink>,
    pub quarantine: Quarantine,
}

impl ArgumentModel {
    pub fn new(name: &str) -> Self {
        ArgumentModel {
            name: name.to_string(),
            version: 1,
            nodes: BTreeMap::new(),
            links: BTreeSet::new(),
            annotations: Vec::new(),
            traces: Vec::new(),
            quarantine: Quarantine::default(),
        }
    }

    pub fn add_node(
        &mut self,
        id: &str,
        kind: NodeKind,
        description: &str,
    ) -> Result<(), GsnError> {
        if self.nodes.contains_key(id) {
            return Err(GsnError::DuplicateNode(id.to_string()));
        }
        self.nodes.insert(
            id.to_string(),
            GsnNode {
                id: id.to_string(),
                kind,
                description: description.to_string(),
                version: 1,
            },
        );
        Ok(())
    }

    pub fn link(&mut self, kind: LinkKind, source: &str, target: &str) {
        self.links.insert(GsnLink {
            kind,
            source: source.to_string(),
            target: target.to_string(),
        });
    }

    pub fn node(&self, id: &str) -> Option<&GsnNode> {
        self.nodes.get(id)
    }

    fn require(&self, id: &str) -> Result<(), GsnError> {
        if self.nodes.contains_key(id) {
            Ok(())
        } else {
            Err(GsnError::UnknownNode(id.to_string()))
        }
    }

    pub fn goals(&self) -> impl Iterator<Item = &GsnNode> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Goal)
    }

    /// Goals that no node supports. A well-formed argument has exactly one.
    pub fn roots(&self) -> Vec<&str> {
        let supported: BTreeSet<&str> = self
            .links
            .iter()
            .filter(|l| l.kind == LinkKind::SupportedBy)
            .map(|l| l.target.as_str())
            .collect();
        self.goals()
            .map(|g| g.id.as_str())
            .filter(|id| !supported.contains(id))
            .collect()
    }

    pub fn targets<'a>(
        &'a self,
        id: &'a str,
        kind: LinkKind,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.links
            .iter()
            .filter(move |l| l.kind == kind && l.source == id)
            .map(|l| l.target.as_str())
    }

    pub fn annotations_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Annotation> + 'a {
        self.annotations.iter().filter(move |a| a.node == id)
    }

    pub fn stereotypes<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.annotations_of(id)
            .filter_map(Annotation::stereotype_name)
    }

    pub fn has_stereotype(&self, id: &str, name: &str) -> bool {
        self.stereotypes(id).any(|s| s == name)
    }

    /// First value recorded for a placeholder key on a node.
    pub fn placeholder(&self, id: &str, key: &str) -> Option<&str> {
        self.annotations
            .iter()
            .filter(|a| a.node == id)
            .filter_map(Annotation::placeholder_entry)
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }

    /// Adds an annotation unless an identical one is present. Returns
    /// whether it was added.
    pub fn annotate(&mut self, ann: Annotation) -> Result<bool, GsnError> {
        self.require(&ann.node)?;
        if self.annotations.contains(&ann) {
            return Ok(false);
        }
        self.annotations.push(ann);
        Ok(true)
    }

    pub fn add_stereotype(
        &mut self,
        id: &str,
        name: &str,
        phases: &[Phase],
    ) -> Result<bool, GsnError> {
        if self.has_stereotype(id, name) {
            self.require(id)?;
            return Ok(false);
        }
        self.annotate(Annotation::stereotype(id, name, phases))
    }

    pub fn remove_stereotype(&mut self, id: &str, name: &str) -> usize {
        let before = self.annotations.len();
        self.annotations
            .retain(|a| !(a.node == id && a.stereotype_name() == Some(name)));
        before - self.annotations.len()
    }

    /// Sets a placeholder, replacing any existing values of the same key on
    /// the node.
    pub fn set_placeholder(
        &mut self,
        id: &str,
        key: &str,
        value: &str,
        phases: &[Phase],
    ) -> Result<(), GsnError> {
        self.require(id)?;
        let ann = Annotation::placeholder(id, key, value, phases);
        match self
            .annotations
            .iter()
            .position(|a| a.node == id && a.placeholder_entry().is_some_and(|(k, _)| k == key))
        {
            Some(i) => {
                self.annotations[i] = ann;
                let mut seen = false;
                self.annotations.retain(|a| {
                    let same = a.node == id && a.placeholder_entry().is_some_and(|(k, _)| k == key);
                    if same && seen {
                        return false;
                    }
                    seen |= same;
                    true
                });
            }
            None => self.annotations.push(ann),
        }
        Ok(())
    }

    pub fn remove_placeholder(&mut self, id: &str, key: &str) -> usize {
        let before = self.annotations.len();
        self.annotations
            .retain(|a| !(a.node == id && a.placeholder_entry().is_some_and(|(k, _)| k == key)));
        before - self.annotations.len()
    }

    pub fn traces_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a TraceLink> + 'a {
        self.traces.iter().filter(move |t| t.node == id)
    }

    pub fn add_trace(&mut self, trace: TraceLink) -> Result<(), GsnError> {
        self.require(&trace.node)?;
        self.traces.push(trace);
        Ok(())
    }

    /// Node ids of the argument, in id order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }
}
