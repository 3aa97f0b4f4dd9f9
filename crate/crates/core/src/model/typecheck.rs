//! Static checks: expression typing, formula acyclicity, assignment locality.

use std::collections::HashMap;

use crate::diag::{Diagnostic, Diagnostics, SourceSpan};

use super::ast::{BinaryOp, ConstKind, Expr, ModelAst, UnaryOp, VarType};
use super::value::Type;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Constant,
    Formula,
    Variable { module: usize },
}

/// A model that passed [`type_check`], with its symbol table.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedModel {
    pub ast: ModelAst,
    symbols: HashMap<String, (SymbolKind, Type)>,
}

impl TypedModel {
    pub fn symbol(&self, name: &str) -> Option<(SymbolKind, Type)> {
        self.symbols.get(name).copied()
    }

    /// Types a free-standing state predicate or expression (e.g. from a
    /// property) against this model's symbols.
    pub fn type_of(&self, e: &Expr) -> Result<Type, String> {
        let mut checker = Checker::new(&self.ast);
        checker.symbols.clone_from(&self.symbols);
        checker.infer(e, Scope::State)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Scope {
    /// Constant definitions and variable bounds: constants only.
    Constant,
    /// Guards, updates, rewards, formulas: anything.
    State,
}

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Visiting,
    Done(Type),
}

struct Checker<'a> {
    ast: &'a ModelAst,
    symbols: HashMap<String, (SymbolKind, Type)>,
    formula_marks: HashMap<String, Mark>,
    const_marks: HashMap<String, Mark>,
}

impl<'a> Checker<'a> {
    fn new(ast: &'a ModelAst) -> Self {
        Checker {
            ast,
            symbols: HashMap::new(),
            formula_marks: HashMap::new(),
            const_marks: HashMap::new(),
        }
    }

    fn const_type(&mut self, name: &str) -> Result<Type, String> {
        match self.const_marks.get(name) {
            Some(Mark::Done(t)) => return Ok(*t),
            Some(Mark::Visiting) => {
                return Err(format!("constant `{name}` is defined in terms of itself"))
            }
            None => {}
        }
        let decl = self
            .ast
            .constants
            .iter()
            .find(|c| c.name == name)
            .expect("constant in symbol table");
        let declared = match decl.kind {
            ConstKind::Int => Type::Int,
            ConstKind::Double => Type::Real,
        };
        self.const_marks.insert(name.to_string(), Mark::Visiting);
        if let Some(value) = &decl.value {
            let t = self.infer(value, Scope::Constant)?;
            let ok = match declared {
                Type::Int => t == Type::Int,
                _ => t.is_numeric(),
            };
            if !ok {
                return Err(format!(
                    "constant `{name}` is declared {declared} but its value has type {t}"
                ));
            }
        }
        self.const_marks
            .insert(name.to_string(), Mark::Done(declared));
        Ok(declared)
    }

    fn formula_type(&mut self, name: &str) -> Result<Type, String> {
        match self.formula_marks.get(name) {
            Some(Mark::Done(t)) => return Ok(*t),
            Some(Mark::Visiting) => return Err(format!("recursive formula `{name}`")),
            None => {}
        }
        let decl = self
            .ast
            .formulas
            .iter()
            .find(|f| f.name == name)
            .expect("formula in symbol table");
        self.formula_marks.insert(name.to_string(), Mark::Visiting);
        let t = self.infer(&decl.expr, Scope::State)?;
        self.formula_marks.insert(name.to_string(), Mark::Done(t));
        Ok(t)
    }

    fn infer(&mut self, e: &Expr, scope: Scope) -> Result<Type, String> {
        match e {
            Expr::Int(_) => Ok(Type::Int),
            Expr::Real(_) => Ok(Type::Real),
            Expr::Bool(_) => Ok(Type::Bool),
            Expr::Ident(name) => match self.symbols.get(name).copied() {
                None => Err(format!("undeclared identifier `{name}`")),
                Some((SymbolKind::Constant, _)) => self.const_type(name),
                Some((SymbolKind::Formula, _)) if scope == Scope::State => self.formula_type(name),
                Some((SymbolKind::Variable { .. }, t)) if scope == Scope::State => Ok(t),
                Some(_) => Err(format!("`{name}` is not a constant")),
            },
            Expr::Unary(op, inner) => {
                let t = self.infer(inner, scope)?;
                match op {
                    UnaryOp::Neg if t.is_numeric() => Ok(t),
                    UnaryOp::Not if t == Type::Bool => Ok(Type::Bool),
                    UnaryOp::Neg => Err(format!("negation of non-numeric operand `{inner}`")),
                    UnaryOp::Not => Err(format!("logical not of non-boolean operand `{inner}`")),
                }
            }
            Expr::Binary(op, l, r) => {
                let (lt, rt) = (self.infer(l, scope)?, self.infer(r, scope)?);
                let sym = op.symbol();
                if op.is_logical() {
                    if lt == Type::Bool && rt == Type::Bool {
                        Ok(Type::Bool)
                    } else {
                        Err(format!(
                            "operator `{sym}` needs boolean operands, found {lt} and {rt} in `{e}`"
                        ))
                    }
                } else if op.is_arithmetic() {
                    if !(lt.is_numeric() && rt.is_numeric()) {
                        Err(format!(
                            "operator `{sym}` needs numeric operands, found {lt} and {rt} in `{e}`"
                        ))
                    } else if *op == BinaryOp::Div || lt == Type::Real || rt == Type::Real {
                        Ok(Type::Real)
                    } else {
                        Ok(Type::Int)
                    }
                } else {
                    let eq = matches!(op, BinaryOp::Eq | BinaryOp::Ne);
                    let ok = (lt.is_numeric() && rt.is_numeric())
                        || (eq && lt == Type::Bool && rt == Type::Bool);
                    if ok {
                        Ok(Type::Bool)
                    } else {
                        Err(format!(
                            "cannot compare {lt} with {rt} using `{sym}` in `{e}`"
                        ))
                    }
                }
            }
        }
    }
}

/// Checks typing, formula acyclicity and assignment locality of a parsed
/// model, returning every error found.
pub fn type_check(ast: &ModelAst) -> Result<TypedModel, Diagnostics> {
    let mut diags: Vec<Diagnostic> = Vec::new();
    let mut ck = Checker::new(ast);

    let mut declare =
        |ck: &mut Checker, name: &str, kind: SymbolKind, t: Type, span: &SourceSpan| {
            if ck.symbols.contains_key(name) {
                diags.push(Diagnostic::error(
                    span.clone(),
                    format!("duplicate identifier `{name}`"),
                ));
            } else {
                ck.symbols.insert(name.to_string(), (kind, t));
            }
        };
    for c in &ast.constants {
        let t = match c.kind {
            ConstKind::Int => Type::Int,
            ConstKind::Double => Type::Real,
        };
        declare(&mut ck, &c.name, SymbolKind::Constant, t, &c.loc.0);
    }
    // formula types are provisional until inferred below
    for f in &ast.formulas {
        declare(&mut ck, &f.name, SymbolKind::Formula, Type::Bool, &f.loc.0);
    }
    for (mi, m) in ast.modules.iter().enumerate() {
        for v in &m.vars {
            let t = match v.ty {
                VarType::Bool => Type::Bool,
                VarType::Range { .. } => Type::Int,
            };
            declare(
                &mut ck,
                &v.name,
                SymbolKind::Variable { module: mi },
                t,
                &v.loc.0,
            );
        }
    }

    for c in &ast.constants {
        if let Err(msg) = ck.const_type(&c.name) {
            diags.push(Diagnostic::error(c.loc.0.clone(), msg));
            ck.const_marks
                .insert(c.name.clone(), Mark::Done(Type::Real));
        }
    }
    for f in &ast.formulas {
        match ck.formula_type(&f.name) {
            Ok(t) => {
                ck.symbols.insert(f.name.clone(), (SymbolKind::Formula, t));
            }
            Err(msg) => {
                diags.push(Diagnostic::error(f.loc.0.clone(), msg));
                ck.formula_marks
                    .insert(f.name.clone(), Mark::Done(Type::Bool));
            }
        }
    }

    for (mi, m) in ast.modules.iter().enumerate() {
        for v in &m.vars {
            let span = &v.loc.0;
            match &v.ty {
                VarType::Range { low, high } => {
                    for bound in [low, high] {
                        match ck.infer(bound, Scope::Constant) {
                            Ok(Type::Int) => {}
                            Ok(t) => diags.push(Diagnostic::error(
                                span.clone(),
                                format!("range bound of `{}` must be int, found {t}", v.name),
                            )),
                            Err(msg) => diags.push(Diagnostic::error(span.clone(), msg)),
                        }
                    }
                }
                VarType::Bool => {}
            }
            if let Some(init) = &v.init {
                let want = if matches!(v.ty, VarType::Bool) {
                    Type::Bool
                } else {
                    Type::Int
                };
                match ck.infer(init, Scope::Constant) {
                    Ok(t) if t == want => {}
                    Ok(t) => diags.push(Diagnostic::error(
                        span.clone(),
                        format!("initial value of `{}` must be {want}, found {t}", v.name),
                    )),
                    Err(msg) => diags.push(Diagnostic::error(span.clone(), msg)),
                }
            }
        }

        for cmd in &m.commands {
            let span = &cmd.loc.0;
            match ck.infer(&cmd.guard, Scope::State) {
                Ok(Type::Bool) => {}
                Ok(t) => diags.push(Diagnostic::error(
                    span.clone(),
                    format!("guard `{}` must be boolean, found {t}", cmd.guard),
                )),
                Err(msg) => diags.push(Diagnostic::error(span.clone(), format!("in guard: {msg}"))),
            }
            for upd in &cmd.updates {
                if let Some(p) = &upd.prob {
                    match ck.infer(p, Scope::State) {
                        Ok(t) if t.is_numeric() => {}
                        Ok(t) => diags.push(Diagnostic::error(
                            span.clone(),
                            format!("update probability `{p}` must be numeric, found {t}"),
                        )),
                        Err(msg) => diags.push(Diagnostic::error(span.clone(), msg)),
                    }
                }
                let mut seen: Vec<&str> = Vec::new();
                for a in &upd.assignments {
                    if seen.contains(&a.var.as_str()) {
                        diags.push(Diagnostic::error(
                            span.clone(),
                            format!("variable `{}` assigned twice in one update", a.var),
                        ));
                    }
                    seen.push(&a.var);
                    let target = match ck.symbols.get(&a.var).copied() {
                        Some((SymbolKind::Variable { module }, t)) if module == mi => t,
                        Some((SymbolKind::Variable { .. }, _)) | Some(_) | None => {
                            diags.push(Diagnostic::error(
                                span.clone(),
                                format!(
                                    "assignment target `{}` is not a local variable of module `{}`",
                                    a.var, m.name
                                ),
                            ));
                            continue;
                        }
                    };
                    match ck.infer(&a.expr, Scope::State) {
                        Ok(t) if t == target => {}
                        Ok(t) => diags.push(Diagnostic::error(
                            span.clone(),
                            format!(
                                "cannot assign {t} value `{}` to {target} variable `{}`",
                                a.expr, a.var
                            ),
                        )),
                        Err(msg) => diags.push(Diagnostic::error(span.clone(), msg)),
                    }
                }
            }
        }
    }

    for r in &ast.rewards {
        for item in &r.items {
            let span = &item.loc.0;
            match ck.infer(&item.guard, Scope::State) {
                Ok(Type::Bool) => {}
                Ok(t) => diags.push(Diagnostic::error(
                    span.clone(),
                    format!("reward guard must be boolean, found {t}"),
                )),
                Err(msg) => diags.push(Diagnostic::error(span.clone(), msg)),
            }
            match ck.infer(&item.value, Scope::State) {
                Ok(t) if t.is_numeric() => {}
                Ok(t) => diags.push(Diagnostic::error(
                    span.clone(),
                    format!("reward value must be numeric, found {t}"),
                )),
                Err(msg) => diags.push(Diagnostic::error(span.clone(), msg)),
            }
        }
    }

    if diags.iter().any(Diagnostic::is_error) {
        return Err(Diagnostics(diags));
    }
    Ok(TypedModel {
        ast: ast.clone(),
        symbols: ck.symbols,
    })
}
