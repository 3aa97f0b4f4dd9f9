//! Constant binding and compiled expressions over state valuations.

use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::diag::SourceSpan;

use super::ast::{BinaryOp, ConstKind, Expr, UnaryOp, VarType};
use super::typecheck::{SymbolKind, TypedModel};
use super::value::{apply_binary, apply_unary, EvalError, Type, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindError {
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("constant `{name}` is declared {expected} but was given {found}")]
    TypeMismatch {
        name: String,
        expected: Type,
        found: Value,
    },
    #[error("probability constant `{name}` = {value} lies outside [0, 1]")]
    ProbabilityOutOfRange { name: String, value: f64 },
    #[error("constant `{0}` has no value; supply it as an override")]
    Undefined(String),
    #[error("variable `{name}`: {message}")]
    BadVariable { name: String, message: String },
    #[error("evaluating `{name}`: {source}")]
    Eval { name: String, source: EvalError },
}

/// Integer or boolean state variable with its evaluated range.
#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub module: usize,
    pub low: i64,
    pub high: i64,
    pub init: i64,
    pub is_bool: bool,
}

/// Expression compiled against a bound model: constants folded, formulas
/// inlined, variables addressed by index into a valuation.
#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Lit(Value),
    Var(usize),
    BoolVar(usize),
    Unary(UnaryOp, Box<CExpr>),
    Binary(BinaryOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    pub fn eval(&self, state: &[i64]) -> Result<Value, EvalError> {
        match self {
            CExpr::Lit(v) => Ok(*v),
            CExpr::Var(i) => Ok(Value::Int(state[*i])),
            CExpr::BoolVar(i) => Ok(Value::Bool(state[*i] != 0)),
            CExpr::Unary(op, e) => apply_unary(*op, e.eval(state)?),
            CExpr::Binary(op, l, r) => apply_binary(*op, l.eval(state)?, r.eval(state)?),
        }
    }

    pub fn eval_bool(&self, state: &[i64]) -> Result<bool, EvalError> {
        self.eval(state)?
            .as_bool()
            .ok_or_else(|| EvalError::Type("expected a boolean".into()))
    }

    pub fn eval_f64(&self, state: &[i64]) -> Result<f64, EvalError> {
        self.eval(state)?
            .as_f64()
            .ok_or_else(|| EvalError::Type("expected a number".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundUpdate {
    pub prob: CExpr,
    pub assignments: Vec<(usize, CExpr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCommand {
    pub module: usize,
    /// Position of the command within its module, for error messages.
    pub index: usize,
    pub action: Option<String>,
    pub guard: CExpr,
    pub updates: Vec<BoundUpdate>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReward {
    pub name: String,
    pub items: Vec<(CExpr, CExpr)>,
}

/// A type-checked model with every constant resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundModel {
    typed: TypedModel,
    constants: Vec<(String, Value)>,
    formulas: HashMap<String, Expr>,
    pub vars: Vec<VarInfo>,
    var_index: HashMap<String, usize>,
    pub module_names: Vec<String>,
    pub commands: Vec<BoundCommand>,
    pub rewards: Vec<BoundReward>,
    fingerprint: String,
}

impl BoundModel {
    pub fn typed(&self) -> &TypedModel {
        &self.typed
    }

    pub fn constant(&self, name: &str) -> Option<Value> {
        self.constants
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn constants(&self) -> &[(String, Value)] {
        &self.constants
    }

    pub fn formula(&self, name: &str) -> Option<&Expr> {
        self.formulas.get(name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn initial_valuation(&self) -> Vec<i64> {
        self.vars.iter().map(|v| v.init).collect()
    }

    /// Content hash of the canonical model text together with the bound
    /// constant values.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Compiles an expression over this model's variables.
    pub fn compile(&self, e: &Expr) -> Result<CExpr, EvalError> {
        self.compile_depth(e, 0)
    }

    fn compile_depth(&self, e: &Expr, depth: usize) -> Result<CExpr, EvalError> {
        // formula chains are acyclic after type checking; the bound guards
        // against hand-built inputs
        if depth > 256 {
            return Err(EvalError::CyclicFormula(e.to_string()));
        }
        Ok(match e {
            Expr::Int(i) => CExpr::Lit(Value::Int(*i)),
            Expr::Real(r) => CExpr::Lit(Value::Real(*r)),
            Expr::Bool(b) => CExpr::Lit(Value::Bool(*b)),
            Expr::Ident(name) => {
                if let Some(&i) = self.var_index.get(name) {
                    if self.vars[i].is_bool {
                        CExpr::BoolVar(i)
                    } else {
                        CExpr::Var(i)
                    }
                } else if let Some(v) = self.constant(name) {
                    CExpr::Lit(v)
                } else if let Some(f) = self.formulas.get(name) {
                    self.compile_depth(f, depth + 1)?
                } else {
                    return Err(EvalError::UnknownIdentifier(name.clone()));
                }
            }
            Expr::Unary(op, inner) => match self.compile_depth(inner, depth)? {
                CExpr::Lit(v) => CExpr::Lit(apply_unary(*op, v)?),
                c => CExpr::Unary(*op, Box::new(c)),
            },
            Expr::Binary(op, l, r) => {
                let (l, r) = (self.compile_depth(l, depth)?, self.compile_depth(r, depth)?);
                match (&l, &r) {
                    (CExpr::Lit(a), CExpr::Lit(b)) => match apply_binary(*op, *a, *b) {
                        Ok(v) => CExpr::Lit(v),
                        // leave e.g. `1/0` to fail at evaluation time
                        Err(_) => CExpr::Binary(*op, Box::new(l), Box::new(r)),
                    },
                    _ => CExpr::Binary(*op, Box::new(l), Box::new(r)),
                }
            }
        })
    }
}

/// Evaluates an expression directly, resolving identifiers against the
/// valuation first, then constants, then formulas (evaluated in place).
pub fn eval_expr(
    e: &Expr,
    valuation: &HashMap<String, Value>,
    env: &BoundModel,
) -> Result<Value, EvalError> {
    fn go(
        e: &Expr,
        valuation: &HashMap<String, Value>,
        env: &BoundModel,
        stack: &mut Vec<String>,
    ) -> Result<Value, EvalError> {
        match e {
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::Real(r) => Ok(Value::Real(*r)),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Ident(name) => {
                if let Some(v) = valuation.get(name) {
                    return Ok(*v);
                }
                if let Some(v) = env.constant(name) {
                    return Ok(v);
                }
                let Some(f) = env.formula(name) else {
                    return Err(EvalError::UnknownIdentifier(name.clone()));
                };
                if stack.contains(name) {
                    return Err(EvalError::CyclicFormula(name.clone()));
                }
                stack.push(name.clone());
                let v = go(f, valuation, env, stack);
                stack.pop();
                v
            }
            Expr::Unary(op, inner) => apply_unary(*op, go(inner, valuation, env, stack)?),
            Expr::Binary(op, l, r) => {
                let a = go(l, valuation, env, stack)?;
                let b = go(r, valuation, env, stack)?;
                apply_binary(*op, a, b)
            }
        }
    }
    go(e, valuation, env, &mut Vec::new())
}

/// Replaces formula references by their definitions, recursively.
pub fn expand_formulas(e: &Expr, env: &BoundModel) -> Result<Expr, EvalError> {
    fn go(e: &Expr, env: &BoundModel, stack: &mut Vec<String>) -> Result<Expr, EvalError> {
        Ok(match e {
            Expr::Ident(name) if env.var_index(name).is_none() && env.constant(name).is_none() => {
                let Some(f) = env.formula(name) else {
                    return Ok(e.clone());
                };
                if stack.contains(name) {
                    return Err(EvalError::CyclicFormula(name.clone()));
                }
                stack.push(name.clone());
                let out = go(f, env, stack)?;
                stack.pop();
                out
            }
            Expr::Unary(op, inner) => Expr::unary(*op, go(inner, env, stack)?),
            Expr::Binary(op, l, r) => Expr::binary(*op, go(l, env, stack)?, go(r, env, stack)?),
            _ => e.clone(),
        })
    }
    go(e, env, &mut Vec::new())
}

/// Resolves every constant of a typed model, applying `overrides` first so
/// that derived constants pick up overridden inputs.
pub fn bind_constants(
    model: &TypedModel,
    overrides: &BTreeMap<String, Value>,
) -> Result<BoundModel, BindError> {
    let ast = &model.ast;
    for (name, v) in overrides {
        let decl = ast
            .constants
            .iter()
            .find(|c| &c.name == name)
            .ok_or_else(|| BindError::UnknownConstant(name.clone()))?;
        let ok = match decl.kind {
            ConstKind::Int => matches!(v, Value::Int(_)),
            ConstKind::Double => matches!(v, Value::Int(_) | Value::Real(_)),
        };
        if !ok {
            return Err(BindError::TypeMismatch {
                name: name.clone(),
                expected: match decl.kind {
                    ConstKind::Int => Type::Int,
                    ConstKind::Double => Type::Real,
                },
                found: *v,
            });
        }
    }

    // resolve constants on demand so declaration order does not matter
    let mut resolved: HashMap<String, Value> = HashMap::new();
    fn resolve(
        name: &str,
        model: &TypedModel,
        overrides: &BTreeMap<String, Value>,
        resolved: &mut HashMap<String, Value>,
    ) -> Result<Value, BindError> {
        if let Some(v) = resolved.get(name) {
            return Ok(*v);
        }
        let decl = model
            .ast
            .constants
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| BindError::UnknownConstant(name.to_string()))?;
        let raw = match overrides.get(name) {
            Some(v) => *v,
            None => {
                let e = decl
                    .value
                    .as_ref()
                    .ok_or_else(|| BindError::Undefined(name.to_string()))?;
                let mut env = HashMap::new();
                for id in e.identifiers() {
                    env.insert(id.to_string(), resolve(id, model, overrides, resolved)?);
                }
                eval_plain(e, &env).map_err(|source| BindError::Eval {
                    name: name.to_string(),
                    source,
                })?
            }
        };
        let v = match (decl.kind, raw) {
            (ConstKind::Double, Value::Int(i)) => Value::Real(i as f64),
            (_, v) => v,
        };
        resolved.insert(name.to_string(), v);
        Ok(v)
    }
    let mut constants = Vec::with_capacity(ast.constants.len());
    for c in &ast.constants {
        constants.push((
            c.name.clone(),
            resolve(&c.name, model, overrides, &mut resolved)?,
        ));
    }

    let const_env: HashMap<String, Value> = constants.iter().cloned().collect();
    let mut vars = Vec::new();
    let mut var_index = HashMap::new();
    for (mi, m) in ast.modules.iter().enumerate() {
        for v in &m.vars {
            let bad = |message: String| BindError::BadVariable {
                name: v.name.clone(),
                message,
            };
            let eval_int = |e: &Expr| -> Result<i64, BindError> {
                eval_plain(e, &const_env)
                    .map_err(|err| bad(err.to_string()))?
                    .as_int()
                    .ok_or_else(|| bad(format!("`{e}` is not an integer")))
            };
            let info = match &v.ty {
                VarType::Bool => {
                    let init = match &v.init {
                        Some(e) => eval_plain(e, &const_env)
                            .map_err(|err| bad(err.to_string()))?
                            .as_bool()
                            .ok_or_else(|| bad("initial value is not boolean".into()))?,
                        None => false,
                    };
                    VarInfo {
                        name: v.name.clone(),
                        module: mi,
                        low: 0,
                        high: 1,
                        init: init as i64,
                        is_bool: true,
                    }
                }
                VarType::Range { low, high } => {
                    let (low, high) = (eval_int(low)?, eval_int(high)?);
                    if low > high {
                        return Err(bad(format!("empty range [{low}..{high}]")));
                    }
                    let init = match &v.init {
                        Some(e) => eval_int(e)?,
                        None => low,
                    };
                    if init < low || init > high {
                        return Err(bad(format!("initial value {init} outside [{low}..{high}]")));
                    }
                    VarInfo {
                        name: v.name.clone(),
                        module: mi,
                        low,
                        high,
                        init,
                        is_bool: false,
                    }
                }
            };
            var_index.insert(v.name.clone(), vars.len());
            vars.push(info);
        }
    }

    let formulas: HashMap<String, Expr> = ast
        .formulas
        .iter()
        .map(|f| (f.name.clone(), f.expr.clone()))
        .collect();

    let mut bound = BoundModel {
        typed: model.clone(),
        constants,
        formulas,
        vars,
        var_index,
        module_names: ast.modules.iter().map(|m| m.name.clone()).collect(),
        commands: Vec::new(),
        rewards: Vec::new(),
        fingerprint: String::new(),
    };

    let compile = |bound: &BoundModel, e: &Expr, what: &str| {
        bound.compile(e).map_err(|source| BindError::Eval {
            name: what.to_string(),
            source,
        })
    };
    let mut commands = Vec::new();
    for (mi, m) in ast.modules.iter().enumerate() {
        for (ci, cmd) in m.commands.iter().enumerate() {
            let what = format!("{} command {}", m.name, ci + 1);
            let mut updates = Vec::new();
            for u in &cmd.updates {
                if let Some(p) = &u.prob {
                    check_probability_constants(&bound, p)?;
                }
                let prob = match &u.prob {
                    Some(p) => compile(&bound, p, &what)?,
                    None => CExpr::Lit(Value::Real(1.0)),
                };
                let mut assignments = Vec::new();
                for a in &u.assignments {
                    let idx = bound
                        .var_index(&a.var)
                        .ok_or_else(|| BindError::BadVariable {
                            name: a.var.clone(),
                            message: "not declared".into(),
                        })?;
                    assignments.push((idx, compile(&bound, &a.expr, &what)?));
                }
                updates.push(BoundUpdate { prob, assignments });
            }
            commands.push(BoundCommand {
                module: mi,
                index: ci,
                action: cmd.action.clone(),
                guard: compile(&bound, &cmd.guard, &what)?,
                updates,
                span: cmd.loc.0.clone(),
            });
        }
    }
    let mut rewards = Vec::new();
    for r in &ast.rewards {
        let what = format!("rewards \"{}\"", r.name);
        let mut items = Vec::new();
        for item in &r.items {
            items.push((
                compile(&bound, &item.guard, &what)?,
                compile(&bound, &item.value, &what)?,
            ));
        }
        rewards.push(BoundReward {
            name: r.name.clone(),
            items,
        });
    }
    bound.commands = commands;
    bound.rewards = rewards;

    let mut hasher = Sha256::new();
    hasher.update(crate::parser::render_model(ast).as_bytes());
    for (n, v) in &bound.constants {
        hasher.update(format!("\n{n}={v}").as_bytes());
    }
    bound.fingerprint = hex::encode(hasher.finalize());
    Ok(bound)
}

/// Double constants appearing (directly or through formulas) in an update
/// probability must be probabilities themselves.
fn check_probability_constants(bound: &BoundModel, prob: &Expr) -> Result<(), BindError> {
    let expanded = expand_formulas(prob, bound).map_err(|source| BindError::Eval {
        name: prob.to_string(),
        source,
    })?;
    for id in expanded.identifiers() {
        if let (Some((SymbolKind::Constant, Type::Real)), Some(v)) =
            (bound.typed.symbol(id), bound.constant(id))
        {
            let x = v.as_f64().unwrap_or(f64::NAN);
            if !(0.0..=1.0).contains(&x) {
                return Err(BindError::ProbabilityOutOfRange {
                    name: id.to_string(),
                    value: x,
                });
            }
        }
    }
    Ok(())
}

fn eval_plain(e: &Expr, env: &HashMap<String, Value>) -> Result<Value, EvalError> {
    match e {
        Expr::Int(i) => Ok(Value::Int(*i)),
        Expr::Real(r) => Ok(Value::Real(*r)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Ident(n) => env
            .get(n)
            .copied()
            .ok_or_else(|| EvalError::UnknownIdentifier(n.clone())),
        Expr::Unary(op, inner) => apply_unary(*op, eval_plain(inner, env)?),
        Expr::Binary(op, l, r) => apply_binary(*op, eval_plain(l, env)?, eval_plain(r, env)?),
    }
}
