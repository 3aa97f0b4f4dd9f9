use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::diag::Severity;

use super::names::{DEFERRED_EVIDENCE, EVIDENCE_PROVIDED};
use super::{AnnotationBody, ArgumentModel, ArtifactKind, LinkKind, NodeKind, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub node: Option<String>,
    pub message: String,
}

impl Issue {
    fn error(node: Option<&str>, message: String) -> Self {
        Issue {
            severity: Severity::Error,
            node: node.map(str::to_string),
            message,
        }
    }

    fn warning(node: Option<&str>, message: String) -> Self {
        Issue {
            severity: Severity::Warning,
            node: node.map(str::to_string),
            message,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.node {
            Some(n) => write!(f, "{sev}: {n}: {}", self.message),
            None => write!(f, "{sev}: {}", self.message),
        }
    }
}

/// Validates against the standard vocabulary.
pub fn validate_argument(arg: &ArgumentModel) -> Vec<Issue> {
    validate_with(arg, &Vocabulary::standard())
}

pub fn validate_with(arg: &ArgumentModel, vocab: &Vocabulary) -> Vec<Issue> {
    let mut issues = Vec::new();

    for n in arg.nodes.values() {
        if n.description.trim().is_empty() {
            issues.push(Issue::error(Some(&n.id), "empty description".into()));
        }
        if n.version == 0 {
            issues.push(Issue::error(
                Some(&n.id),
                "version must be at least 1".into(),
            ));
        }
    }

    for l in &arg.links {
        let (Some(src), Some(dst)) = (arg.node(&l.source), arg.node(&l.target)) else {
            for end in [&l.source, &l.target] {
                if arg.node(end).is_none() {
                    issues.push(Issue::error(
                        Some(&l.source),
                        format!("{} link refers to missing node `{end}`", l.kind),
                    ));
                }
            }
            continue;
        };
        use NodeKind::*;
        let ok = match l.kind {
            LinkKind::SupportedBy => matches!(
                (src.kind, dst.kind),
                (Goal, Strategy) | (Strategy, Goal) | (Goal, Solution)
            ),
            LinkKind::InContextOf => matches!((src.kind, dst.kind), (Goal, Context)),
        };
        if !ok {
            issues.push(Issue::error(
                Some(&l.source),
                format!(
                    "{} {} may not link {} `{}`",
                    src.kind, l.kind, dst.kind, dst.id
                ),
            ));
        }
    }

    if let Some(cycle_node) = supported_by_cycle(arg) {
        issues.push(Issue::error(
            Some(&cycle_node),
            "supported-by links form a cycle".into(),
        ));
    }

    let roots = arg.roots();
    match roots.len() {
        0 => issues.push(Issue::error(None, "no root goal".into())),
        1 => {}
        _ => issues.push(Issue::error(
            None,
            format!("multiple root goals: {}", roots.join(", ")),
        )),
    }
    if arg.goals().count() <= 1 {
        issues.push(Issue::warning(None, "no sub-goals".into()));
    }

    for a in &arg.annotations {
        if arg.node(&a.node).is_none() {
            issues.push(Issue::error(
                Some(&a.node),
                "annotation on missing node".into(),
            ));
            continue;
        }
        let (what, name, entry) = match &a.body {
            AnnotationBody::Placeholder { key, .. } => ("placeholder", key, vocab.placeholder(key)),
            AnnotationBody::Stereotype(s) => ("stereotype", s, vocab.stereotype(s)),
        };
        match entry {
            None => issues.push(Issue::warning(
                Some(&a.node),
                format!("{what} `{name}` is not in the registered vocabulary"),
            )),
            Some(e) => {
                let stray: Vec<String> = a
                    .phases
                    .iter()
                    .filter(|p| !e.phases.contains(p))
                    .map(|p| p.to_string())
                    .collect();
                if !stray.is_empty() {
                    issues.push(Issue::warning(
                        Some(&a.node),
                        format!("{what} `{name}` is not used in phase {}", stray.join(", ")),
                    ));
                }
            }
        }
    }

    let mut both = BTreeSet::new();
    for id in arg.ids() {
        if arg.has_stereotype(id, DEFERRED_EVIDENCE) && arg.has_stereotype(id, EVIDENCE_PROVIDED) {
            both.insert(id);
        }
    }
    for id in both {
        issues.push(Issue::error(
            Some(id),
            "carries both DeferredEvidence and EvidenceProvided".into(),
        ));
    }

    for t in &arg.traces {
        if arg.node(&t.node).is_none() {
            issues.push(Issue::error(
                Some(&t.node),
                "trace link on missing node".into(),
            ));
        } else if t.artifact != ArtifactKind::ExternalEvidence && t.fingerprint.is_none() {
            issues.push(Issue::warning(
                Some(&t.node),
                format!("{} trace `{}` has no fingerprint", t.artifact, t.reference),
            ));
        }
    }

    issues
}

/// Some node on a supported-by cycle, if there is one.
fn supported_by_cycle(arg: &ArgumentModel) -> Option<String> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for l in arg.links.iter().filter(|l| l.kind == LinkKind::SupportedBy) {
        succ.entry(&l.source).or_default().push(&l.target);
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for start in succ.keys() {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        state.insert(start, 1);
        while let Some((n, i)) = stack.pop() {
            let next = succ.get(n).and_then(|v| v.get(i)).copied();
            match next {
                Some(m) => {
                    stack.push((n, i + 1));
                    match state.get(m).copied().unwrap_or(0) {
                        1 => return Some(m.to_string()),
                        0 => {
                            state.insert(m, 1);
                            stack.push((m, 0));
                        }
                        _ => {}
                    }
                }
                None => {
                    state.insert(n, 2);
                }
            }
        }
    }
    None
}
