//! Abstract syntax for the model and property languages.

use std::fmt;

use crate::diag::Loc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    /// Logical implication; only reachable from property formulas.
    Implies,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::And => "&",
            BinaryOp::Or => "|",
            BinaryOp::Implies => "=>",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinaryOp::Implies => 1,
            BinaryOp::Or => 2,
            BinaryOp::And => 3,
            BinaryOp::Eq | BinaryOp::Ne => 5,
            BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => 6,
            BinaryOp::Add | BinaryOp::Sub => 7,
            BinaryOp::Mul | BinaryOp::Div => 8,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div
        )
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinaryOp::And | BinaryOp::Or | BinaryOp::Implies)
    }
}

/// Precedence of prefix `!`; sits between `&` and the equality operators.
pub const NOT_PRECEDENCE: u8 = 4;
/// Precedence of prefix `-`.
pub const NEG_PRECEDENCE: u8 = 9;

/// Expression tree. Identifiers are resolved against variables, constants
/// and formulas of the enclosing model when the expression is evaluated or
/// type checked.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into())
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Self {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, l: Expr, r: Expr) -> Self {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Identifiers referenced anywhere in the tree, in first-occurrence order.
    pub fn identifiers(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_idents(&mut out);
        out
    }

    fn collect_idents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Ident(n) => {
                if !out.contains(&n.as_str()) {
                    out.push(n);
                }
            }
            Expr::Unary(_, e) => e.collect_idents(out),
            Expr::Binary(_, l, r) => {
                l.collect_idents(out);
                r.collect_idents(out);
            }
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Unary(UnaryOp::Not, _) => NOT_PRECEDENCE,
            Expr::Unary(UnaryOp::Neg, _) => NEG_PRECEDENCE,
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Real(v) if *v < 0.0 || v.is_sign_negative() => NEG_PRECEDENCE,
            Expr::Int(v) if *v < 0 => NEG_PRECEDENCE,
            _ => u8::MAX,
        }
    }
}

fn fmt_real(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E', 'i', 'N']) {
        f.write_str(&s)
    } else {
        write!(f, "{s}.0")
    }
}

fn fmt_child(child: &Expr, needs_parens: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if needs_parens {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

/// Renders with the minimum parentheses needed to re-parse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Real(v) => fmt_real(*v, f),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(n) => f.write_str(n),
            Expr::Unary(op, e) => {
                let prec = self.precedence();
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                })?;
                // keep `- -x` and `-(-1)` unambiguous
                let nested_neg = *op == UnaryOp::Neg && e.precedence() == NEG_PRECEDENCE;
                fmt_child(e, e.precedence() < prec || nested_neg, f)
            }
            Expr::Binary(op, l, r) => {
                let prec = op.precedence();
                let right_assoc = *op == BinaryOp::Implies;
                let (lp, rp) = if right_assoc {
                    (l.precedence() <= prec, r.precedence() < prec)
                } else {
                    (l.precedence() < prec, r.precedence() <= prec)
                };
                fmt_child(l, lp, f)?;
                write!(f, " {} ", op.symbol())?;
                fmt_child(r, rp, f)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelType {
    Dtmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstKind {
    Int,
    Double,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub kind: ConstKind,
    /// `None` for constants left open in the source; they must be supplied
    /// as overrides when binding.
    pub value: Option<Expr>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaDecl {
    pub name: String,
    pub expr: Expr,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarType {
    Range { low: Expr, high: Expr },
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: VarType,
    pub init: Option<Expr>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub var: String,
    pub expr: Expr,
}

/// One probabilistic branch of a command. A missing probability means 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub prob: Option<Expr>,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub updates: Vec<Update>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<Command>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub guard: Expr,
    pub value: Expr,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructureDecl {
    pub name: String,
    pub items: Vec<RewardItem>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub model_type: ModelType,
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<FormulaDecl>,
    pub modules: Vec<Module>,
    pub rewards: Vec<RewardStructureDecl>,
}

impl ModelAst {
    pub fn variable_count(&self) -> usize {
        self.modules.iter().map(|m| m.vars.len()).sum()
    }

    pub fn reward_structure(&self, name: &str) -> Option<&RewardStructureDecl> {
        self.rewards.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundOp {
    AtLeast,
    AtMost,
}

impl BoundOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BoundOp::AtLeast => ">=",
            BoundOp::AtMost => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    /// `P=? [...]`
    Probability,
    /// `P>=b [...]` or `P<=b [...]`
    ProbabilityBound { op: BoundOp, bound: f64 },
    /// `R{"name"}=? [F ...]`
    Reward { structure: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathFormula {
    Eventually(Expr),
    BoundedEventually { steps: u32, target: Expr },
    Globally(Expr),
    Until(Expr, Expr),
}

/// Wraps logical compounds in parentheses so path bodies read unambiguously.
struct Operand<'a>(&'a Expr);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Binary(BinaryOp::And | BinaryOp::Or | BinaryOp::Implies, ..) => {
                write!(f, "({})", self.0)
            }
            e => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Eventually(e) => write!(f, "F {}", Operand(e)),
            PathFormula::BoundedEventually { steps, target } => {
                write!(f, "F<={steps} {}", Operand(target))
            }
            PathFormula::Globally(e) => write!(f, "G {}", Operand(e)),
            PathFormula::Until(l, r) => write!(f, "{} U {}", Operand(l), Operand(r)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySpec {
    pub name: String,
    pub query: Query,
    pub path: PathFormula,
    pub loc: Loc,
}

impl PropertySpec {
    /// Canonical formula text without the name prefix.
    pub fn formula_text(&self) -> String {
        match &self.query {
            Query::Probability => format!("P=? [ {} ]", self.path),
            Query::ProbabilityBound { op, bound } => {
                let mut b = format!("{bound:?}");
                if b.ends_with(".0") {
                    b.truncate(b.len() - 2);
                }
                format!("P{}{} [ {} ]", op.symbol(), b, self.path)
            }
            Query::Reward { structure } => format!("R{{\"{structure}\"}}=? [ {} ]", self.path),
        }
    }

    pub fn is_bound(&self) -> bool {
        matches!(self.query, Query::ProbabilityBound { .. })
    }
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\": {}", self.name, self.formula_text())
    }
}
