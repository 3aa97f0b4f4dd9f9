use std::collections::BTreeMap;

use super::Phase::{self, Design, Evolution, Runtime};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabularyEntry {
    pub phases: Vec<Phase>,
    pub description: String,
}

/// Registered placeholder keys and stereotype names with their phases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    placeholders: BTreeMap<String, VocabularyEntry>,
    stereotypes: BTreeMap<String, VocabularyEntry>,
}

const ALL: &[Phase] = &[Design, Runtime, Evolution];

impl Vocabulary {
    pub fn empty() -> Self {
        Vocabulary {
            placeholders: BTreeMap::new(),
            stereotypes: BTreeMap::new(),
        }
    }

    /// The closed annotation vocabulary for design, runtime and evolution
    /// time assurance.
    pub fn core() -> Self {
        let mut v = Self::empty();
        v.register_placeholder(
            "trace_expr",
            &[Design, Runtime],
            "trace-based assumption for monitor configuration",
        );
        v.register_placeholder(
            "monitor_id",
            ALL,
            "links a goal to a runtime monitor and its logs",
        );
        v.register_placeholder("deferred", ALL, "claim not yet discharged");
        v.register_placeholder(
            "confidence_threshold",
            &[Runtime],
            "minimum confidence score before the goal is reopened",
        );
        v.register_placeholder("monitor_expr", &[Runtime], "condition checked by a monitor");
        v.register_placeholder(
            "evidence_cost",
            &[Design, Evolution],
            "effort to regenerate the evidence, `<n>h` or `<n>d`",
        );
        v.register_placeholder("evolution_package", &[Evolution], "triggering artifacts");
        v.register_placeholder(
            "impact_summary",
            &[Evolution],
            "valid / invalid / uncertain counts",
        );
        v.register_placeholder("regeneration_plan", &[Evolution], "repair strategy");
        v.register_stereotype(
            "TraceMonitored",
            &[Design, Runtime],
            "goal tied to a monitored trace assumption",
        );
        v.register_stereotype(
            "DeferredEvidence",
            ALL,
            "evidence postponed, missing or reopened",
        );
        v.register_stereotype(
            "RuntimeAssumptionMonitor",
            &[Runtime, Evolution],
            "runtime assumption monitor",
        );
        v.register_stereotype(
            "ConfidenceMonitor",
            &[Runtime, Evolution],
            "confidence monitor",
        );
        v.register_stereotype(
            "Reopened",
            &[Runtime, Evolution],
            "reopened by a violation or alert",
        );
        v.register_stereotype(
            "RegenerationPlan",
            &[Evolution],
            "evidence recovery planned",
        );
        v.register_stereotype(
            "ImpactAnalysis",
            &[Evolution],
            "impact analysis summary attached",
        );
        v.register_stereotype(
            "EvidenceProvided",
            &[Evolution],
            "evidence regenerated and discharged",
        );
        v
    }

    /// [`Vocabulary::core`] plus the extension keys the lifecycle tools
    /// write themselves.
    pub fn standard() -> Self {
        let mut v = Self::core();
        v.register_placeholder(
            "runtime_log",
            &[Runtime, Evolution],
            "log reference of the monitor event that reopened the goal",
        );
        v.register_placeholder(
            "safety_critical",
            &[Design, Evolution],
            "`true` marks a safety-critical goal for regeneration planning",
        );
        v
    }

    pub fn register_placeholder(&mut self, key: &str, phases: &[Phase], description: &str) {
        self.placeholders
            .insert(key.to_string(), entry(phases, description));
    }

    pub fn register_stereotype(&mut self, name: &str, phases: &[Phase], description: &str) {
        self.stereotypes
            .insert(name.to_string(), entry(phases, description));
    }

    pub fn placeholder(&self, key: &str) -> Option<&VocabularyEntry> {
        self.placeholders.get(key)
    }

    pub fn stereotype(&self, name: &str) -> Option<&VocabularyEntry> {
        self.stereotypes.get(name)
    }

    pub fn placeholder_keys(&self) -> impl Iterator<Item = &str> {
        self.placeholders.keys().map(String::as_str)
    }

    pub fn stereotype_names(&self) -> impl Iterator<Item = &str> {
        self.stereotypes.keys().map(String::as_str)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::standard()
    }
}

fn entry(phases: &[Phase], description: &str) -> VocabularyEntry {
    VocabularyEntry {
        phases: super::normalize_phases(phases),
        description: description.to_string(),
    }
}
