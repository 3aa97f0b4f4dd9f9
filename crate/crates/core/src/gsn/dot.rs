use std::fmt::Write;

use super::{ArgumentModel, LinkKind, NodeKind};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
}

/// Graphviz rendering: goals as boxes, strategies as parallelograms,
/// solutions as circles, contexts as rounded boxes. Stereotypes prefix the
/// label as «Name».
pub fn export_dot(arg: &ArgumentModel) -> String {
    let mut out = format!("digraph \"{}\" {{\n", escape(&arg.name));
    out.push_str("    rankdir=TB;\n    node [fontname=\"Helvetica\", fontsize=10];\n");
    for n in arg.nodes.values() {
        let shape = match n.kind {
            NodeKind::Goal => "shape=box",
            NodeKind::Strategy => "shape=parallelogram",
            NodeKind::Solution => "shape=circle",
            NodeKind::Context => "shape=box, style=rounded",
        };
        let mut label = String::new();
        for s in arg.stereotypes(&n.id) {
            write!(label, "«{s}» ").unwrap();
        }
        if !label.is_empty() {
            label.pop();
            label.push('\n');
        }
        write!(label, "{} (v{})\n{}", n.id, n.version, n.description).unwrap();
        for (k, v) in arg
            .annotations_of(&n.id)
            .filter_map(|a| a.placeholder_entry())
        {
            write!(label, "\n{{{k}={v}}}").unwrap();
        }
        writeln!(
            out,
            "    \"{}\" [{shape}, label=\"{}\"];",
            escape(&n.id),
            escape(&label)
        )
        .unwrap();
    }
    for l in &arg.links {
        let style = match l.kind {
            LinkKind::SupportedBy => "arrowhead=normal",
            LinkKind::InContextOf => "arrowhead=empty, style=dashed",
        };
        writeln!(
            out,
            "    \"{}\" -> \"{}\" [{style}];",
            escape(&l.source),
            escape(&l.target)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
