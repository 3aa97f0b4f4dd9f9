use std::fmt::Write;

use crate::model::{ConstKind, ModelAst, ModelType, Update, VarType};

/// Pretty-prints a model in canonical layout: header, constants, formulas,
/// modules, reward structures. Comments are not preserved.
pub fn render_model(ast: &ModelAst) -> String {
    let mut out = String::new();
    out.push_str(match ast.model_type {
        ModelType::Dtmc => "dtmc\n",
    });

    if !ast.constants.is_empty() {
        out.push('\n');
        for c in &ast.constants {
            let kind = match c.kind {
                ConstKind::Int => "int",
                ConstKind::Double => "double",
            };
            match &c.value {
                Some(v) => writeln!(out, "const {kind} {} = {v};", c.name).unwrap(),
                None => writeln!(out, "const {kind} {};", c.name).unwrap(),
            }
        }
    }

    if !ast.formulas.is_empty() {
        out.push('\n');
        for f in &ast.formulas {
            writeln!(out, "formula {} = {};", f.name, f.expr).unwrap();
        }
    }

    for m in &ast.modules {
        writeln!(out, "\nmodule {}", m.name).unwrap();
        for v in &m.vars {
            let ty = match &v.ty {
                VarType::Bool => "bool".to_string(),
                VarType::Range { low, high } => format!("[{low}..{high}]"),
            };
            match &v.init {
                Some(init) => writeln!(out, "    {} : {ty} init {init};", v.name).unwrap(),
                None => writeln!(out, "    {} : {ty};", v.name).unwrap(),
            }
        }
        if !m.vars.is_empty() && !m.commands.is_empty() {
            out.push('\n');
        }
        for c in &m.commands {
            let updates: Vec<String> = c.updates.iter().map(render_update).collect();
            writeln!(
                out,
                "    [{}] {} -> {};",
                c.action.as_deref().unwrap_or(""),
                c.guard,
                updates.join(" + ")
            )
            .unwrap();
        }
        out.push_str("endmodule\n");
    }

    for r in &ast.rewards {
        writeln!(out, "\nrewards \"{}\"", r.name).unwrap();
        for item in &r.items {
            writeln!(out, "    {} : {};", item.guard, item.value).unwrap();
        }
        out.push_str("endrewards\n");
    }
    out
}

fn render_update(u: &Update) -> String {
    let body = if u.assignments.is_empty() {
        "true".to_string()
    } else {
        u.assignments
            .iter()
            .map(|a| format!("({}' = {})", a.var, a.expr))
            .collect::<Vec<_>>()
            .join(" & ")
    };
    match &u.prob {
        Some(p) => format!("{p} : {body}"),
        None => body,
    }
}
