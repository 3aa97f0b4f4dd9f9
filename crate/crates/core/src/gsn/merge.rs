use super::names::{DEFERRED_EVIDENCE, EVIDENCE_PROVIDED};
use super::{Annotation, ArgumentModel, ArtifactKind, TraceLink};

/// Carries manual annotations and external-evidence trace links of
/// `previous` over to `regenerated`.
///
/// Items whose node is gone are moved to the quarantine, and quarantined
/// items whose node has reappeared are re-attached. Annotations the
/// transformer generated are not carried over: `regenerated` holds their
/// current values. An `EvidenceProvided` stereotype is not carried onto a
/// node that the regeneration marked `DeferredEvidence` again.
pub fn merge_annotations(regenerated: &ArgumentModel, previous: &ArgumentModel) -> ArgumentModel {
    let mut out = regenerated.clone();
    let carried = previous
        .annotations
        .iter()
        .filter(|a| !a.generated)
        .chain(&previous.quarantine.annotations);
    for a in carried {
        place_annotation(&mut out, a);
    }
    let traces = previous
        .traces
        .iter()
        .filter(|t| t.artifact == ArtifactKind::ExternalEvidence)
        .chain(&previous.quarantine.traces);
    for t in traces {
        place_trace(&mut out, t);
    }
    out
}

fn place_annotation(out: &mut ArgumentModel, a: &Annotation) {
    if out.nodes.contains_key(&a.node) {
        let redischarged = a.stereotype_name() == Some(EVIDENCE_PROVIDED)
            && out
                .annotations_of(&a.node)
                .any(|b| b.generated && b.stereotype_name() == Some(DEFERRED_EVIDENCE));
        if !redischarged && !out.annotations.contains(a) {
            out.annotations.push(a.clone());
        }
    } else if !out.quarantine.annotations.contains(a) {
        out.quarantine.annotations.push(a.clone());
    }
}

fn place_trace(out: &mut ArgumentModel, t: &TraceLink) {
    if out.nodes.contains_key(&t.node) {
        if !out.traces.contains(t) {
            out.traces.push(t.clone());
        }
    } else if !out.quarantine.traces.contains(t) {
        out.quarantine.traces.push(t.clone());
    }
}
