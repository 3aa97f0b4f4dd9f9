//! Parsers for the `.prism`-style model language and the `.props`-style
//! property language, plus a canonical model renderer.
//!
//! Both parsers stop at the first syntax error; declaration-level checks
//! (duplicate identifiers, assignments to undeclared variables) are reported
//! together afterwards.

mod lexer;
mod render;

use std::collections::HashSet;

use crate::diag::{Diagnostic, Diagnostics, Loc, SourceSpan};
use crate::model::{
    Assignment, BinaryOp, BoundOp, Command, ConstDecl, ConstKind, Expr, FormulaDecl, ModelAst,
    ModelType, Module, PathFormula, PropertySpec, Query, RewardItem, RewardStructureDecl, UnaryOp,
    Update, VarDecl, VarType,
};

pub use lexer::{tokenize, Tok, Token};
pub use render::render_model;

type PResult<T> = Result<T, Diagnostic>;

/// Parses model text.
pub fn parse_model(text: &str) -> Result<ModelAst, Diagnostics> {
    let tokens = tokenize(text).map_err(|d| Diagnostics(vec![d]))?;
    let mut p = Parser::new(tokens, false);
    let ast = p.model().map_err(|d| Diagnostics(vec![d]))?;
    let diags = check_declarations(&ast);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(Diagnostics(diags));
    }
    Ok(ast)
}

/// Parses a property file. Properties without a `"name":` prefix are named
/// `prop<k>` after their 1-based position in the file.
pub fn parse_properties(text: &str) -> Result<Vec<PropertySpec>, Diagnostics> {
    let tokens = tokenize(text).map_err(|d| Diagnostics(vec![d]))?;
    let mut p = Parser::new(tokens, true);
    p.properties().map_err(|d| Diagnostics(vec![d]))
}

/// Parses a single state expression (property-file syntax).
pub fn parse_expr(text: &str) -> Result<Expr, Diagnostics> {
    let tokens = tokenize(text).map_err(|d| Diagnostics(vec![d]))?;
    let mut p = Parser::new(tokens, true);
    let e = p.expr().map_err(|d| Diagnostics(vec![d]))?;
    p.expect(&Tok::Eof, "end of expression")
        .map_err(|d| Diagnostics(vec![d]))?;
    Ok(e)
}

const UNSUPPORTED_ITEMS: &[&str] = &["init", "label", "system", "global", "endinit", "endsystem"];
const UNSUPPORTED_MODEL_TYPES: &[&str] = &[
    "mdp",
    "ctmc",
    "pta",
    "smg",
    "nondeterministic",
    "stochastic",
];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Accept `->` as implication (property files only; in models it
    /// separates guards from updates).
    arrow_implies: bool,
}

impl Parser {
    fn new(toks: Vec<Token>, arrow_implies: bool) -> Self {
        Parser {
            toks,
            pos: 0,
            arrow_implies,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error_here(&self, expected: &str) -> Diagnostic {
        Diagnostic::error(
            self.span(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    fn expect(&mut self, t: &Tok, expected: &str) -> PResult<Token> {
        if self.peek() == t {
            Ok(self.bump())
        } else {
            Err(self.error_here(expected))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        if self.at_kw(kw) {
            Ok(self.bump())
        } else {
            Err(self.error_here(&format!("`{kw}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.span();
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn unsupported(&self, what: &str) -> Diagnostic {
        Diagnostic::error(self.span(), format!("unsupported construct: {what}"))
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.or_expr()?;
        let is_implies = matches!(self.peek(), Tok::Implies)
            || (self.arrow_implies && matches!(self.peek(), Tok::Arrow));
        if is_implies {
            self.bump();
            let rhs = self.expr()?;
            return Ok(Expr::binary(BinaryOp::Implies, lhs, rhs));
        }
        if matches!(self.peek(), Tok::Question) {
            return Err(self.unsupported("conditional expression `? :`"));
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut e = self.and_expr()?;
        while self.eat(&Tok::Or) {
            e = Expr::binary(BinaryOp::Or, e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut e = self.not_expr()?;
        while self.eat(&Tok::And) {
            e = Expr::binary(BinaryOp::And, e, self.not_expr()?);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Not) {
            return Ok(Expr::unary(UnaryOp::Not, self.not_expr()?));
        }
        self.eq_expr()
    }

    fn eq_expr(&mut self) -> PResult<Expr> {
        let mut e = self.rel_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Eq => BinaryOp::Eq,
                Tok::Ne => BinaryOp::Ne,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::binary(op, e, self.rel_expr()?);
        }
    }

    fn rel_expr(&mut self) -> PResult<Expr> {
        let mut e = self.add_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Lt => BinaryOp::Lt,
                Tok::Le => BinaryOp::Le,
                Tok::Gt => BinaryOp::Gt,
                Tok::Ge => BinaryOp::Ge,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::binary(op, e, self.add_expr()?);
        }
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut e = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::binary(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut e = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::binary(op, e, self.unary_expr()?);
        }
    }

    fn unary_expr(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::unary(UnaryOp::Neg, self.unary_expr()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Expr::Real(r))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Str(_) => Err(self.unsupported("label reference in expression")),
            Tok::Ident(s) => {
                match s.as_str() {
                    "true" => {
                        self.bump();
                        return Ok(Expr::Bool(true));
                    }
                    "false" => {
                        self.bump();
                        return Ok(Expr::Bool(false));
                    }
                    _ => {}
                }
                if self.arrow_implies
                    && (s == "P" || s == "R")
                    && matches!(
                        self.peek_at(1),
                        Tok::QueryEq | Tok::Ge | Tok::Le | Tok::LBrace | Tok::Gt | Tok::Lt
                    )
                {
                    return Err(self.unsupported("nested probabilistic or reward operator"));
                }
                if matches!(self.peek_at(1), Tok::LParen) {
                    return Err(self.unsupported(&format!("function call `{s}(...)`")));
                }
                self.bump();
                Ok(Expr::Ident(s))
            }
            _ => Err(self.error_here("an expression")),
        }
    }

    // ---- models ----

    fn model(&mut self) -> PResult<ModelAst> {
        let model_type = match self.peek().clone() {
            Tok::Ident(s) if s == "dtmc" || s == "probabilistic" => {
                self.bump();
                ModelType::Dtmc
            }
            Tok::Ident(s) if UNSUPPORTED_MODEL_TYPES.contains(&s.as_str()) => {
                return Err(self.unsupported(&format!("model type `{s}` (only dtmc)")));
            }
            _ => return Err(self.error_here("model type header")),
        };
        let mut ast = ModelAst {
            model_type,
            constants: Vec::new(),
            formulas: Vec::new(),
            modules: Vec::new(),
            rewards: Vec::new(),
        };
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(s) => match s.as_str() {
                    "const" => ast.constants.push(self.const_decl()?),
                    "formula" => ast.formulas.push(self.formula_decl()?),
                    "module" => ast.modules.push(self.module()?),
                    "rewards" => ast.rewards.push(self.rewards()?),
                    kw if UNSUPPORTED_ITEMS.contains(&kw) => {
                        return Err(self.unsupported(&format!("`{kw}` block")));
                    }
                    kw if UNSUPPORTED_MODEL_TYPES.contains(&kw) || kw == "dtmc" => {
                        return Err(Diagnostic::error(
                            self.span(),
                            "duplicate model type header",
                        ));
                    }
                    _ => return Err(self.error_here("`const`, `formula`, `module` or `rewards`")),
                },
                _ => return Err(self.error_here("`const`, `formula`, `module` or `rewards`")),
            }
        }
        Ok(ast)
    }

    fn const_decl(&mut self) -> PResult<ConstDecl> {
        let span = self.span();
        self.expect_kw("const")?;
        let kind = match self.peek() {
            Tok::Ident(s) if s == "int" => {
                self.bump();
                ConstKind::Int
            }
            Tok::Ident(s) if s == "double" => {
                self.bump();
                ConstKind::Double
            }
            Tok::Ident(s) if s == "bool" => return Err(self.unsupported("boolean constants")),
            _ => ConstKind::Int,
        };
        let (name, _) = self.ident("constant name")?;
        let value = if self.eat(&Tok::Eq) {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(&Tok::Semi, "`;`")?;
        Ok(ConstDecl {
            name,
            kind,
            value,
            loc: Loc(span),
        })
    }

    fn formula_decl(&mut self) -> PResult<FormulaDecl> {
        let span = self.span();
        self.expect_kw("formula")?;
        let (name, _) = self.ident("formula name")?;
        self.expect(&Tok::Eq, "`=`")?;
        let expr = self.expr()?;
        self.expect(&Tok::Semi, "`;`")?;
        Ok(FormulaDecl {
            name,
            expr,
            loc: Loc(span),
        })
    }

    fn module(&mut self) -> PResult<Module> {
        let span = self.span();
        self.expect_kw("module")?;
        let (name, _) = self.ident("module name")?;
        if matches!(self.peek(), Tok::Eq) {
            return Err(self.unsupported("module renaming"));
        }
        let mut m = Module {
            name,
            vars: Vec::new(),
            commands: Vec::new(),
            loc: Loc(span),
        };
        loop {
            match self.peek() {
                Tok::Ident(s) if s == "endmodule" => {
                    self.bump();
                    return Ok(m);
                }
                Tok::Ident(_) if matches!(self.peek_at(1), Tok::Colon) => {
                    m.vars.push(self.var_decl()?)
                }
                Tok::LBracket => m.commands.push(self.command()?),
                _ => return Err(self.error_here("variable declaration, command or `endmodule`")),
            }
        }
    }

    fn var_decl(&mut self) -> PResult<VarDecl> {
        let span = self.span();
        let (name, _) = self.ident("variable name")?;
        self.expect(&Tok::Colon, "`:`")?;
        let ty = if self.at_kw("bool") {
            self.bump();
            VarType::Bool
        } else {
            self.expect(&Tok::LBracket, "`[` or `bool`")?;
            let low = self.expr()?;
            self.expect(&Tok::DotDot, "`..`")?;
            let high = self.expr()?;
            self.expect(&Tok::RBracket, "`]`")?;
            VarType::Range { low, high }
        };
        let init = if self.at_kw("init") {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(&Tok::Semi, "`;`")?;
        Ok(VarDecl {
            name,
            ty,
            init,
            loc: Loc(span),
        })
    }

    fn command(&mut self) -> PResult<Command> {
        let span = self.span();
        self.expect(&Tok::LBracket, "`[`")?;
        let action = match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Some(s)
            }
            _ => None,
        };
        self.expect(&Tok::RBracket, "`]`")?;
        let guard = self.expr()?;
        self.expect(&Tok::Arrow, "`->`")?;
        let mut updates = vec![self.update()?];
        while self.eat(&Tok::Plus) {
            updates.push(self.update()?);
        }
        self.expect(&Tok::Semi, "`;`")?;
        Ok(Command {
            action,
            guard,
            updates,
            loc: Loc(span),
        })
    }

    fn starts_assignments(&self) -> bool {
        match (self.peek(), self.peek_at(1), self.peek_at(2)) {
            (Tok::LParen, Tok::Ident(_), Tok::Prime) => true,
            (Tok::Ident(s), Tok::Semi | Tok::Plus, _) => s == "true",
            _ => false,
        }
    }

    fn update(&mut self) -> PResult<Update> {
        let prob = if self.starts_assignments() {
            None
        } else {
            let p = self.expr()?;
            self.expect(&Tok::Colon, "`:` after update probability")?;
            Some(p)
        };
        let mut assignments = Vec::new();
        if self.at_kw("true") {
            self.bump();
            return Ok(Update { prob, assignments });
        }
        loop {
            self.expect(&Tok::LParen, "`(` starting an assignment")?;
            let (var, _) = self.ident("variable name")?;
            self.expect(&Tok::Prime, "`'`")?;
            self.expect(&Tok::Eq, "`=`")?;
            let expr = self.expr()?;
            self.expect(&Tok::RParen, "`)`")?;
            assignments.push(Assignment { var, expr });
            if !self.eat(&Tok::And) {
                break;
            }
        }
        Ok(Update { prob, assignments })
    }

    fn rewards(&mut self) -> PResult<RewardStructureDecl> {
        let span = self.span();
        self.expect_kw("rewards")?;
        let name = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return Err(self.error_here("reward structure name in quotes")),
        };
        let mut items = Vec::new();
        loop {
            if self.at_kw("endrewards") {
                self.bump();
                break;
            }
            if matches!(self.peek(), Tok::LBracket) {
                return Err(self.unsupported("transition rewards"));
            }
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.error_here("`endrewards`"));
            }
            let item_span = self.span();
            let guard = self.expr()?;
            self.expect(&Tok::Colon, "`:`")?;
            let value = self.expr()?;
            self.expect(&Tok::Semi, "`;`")?;
            items.push(RewardItem {
                guard,
                value,
                loc: Loc(item_span),
            });
        }
        Ok(RewardStructureDecl {
            name,
            items,
            loc: Loc(span),
        })
    }

    // ---- properties ----

    fn properties(&mut self) -> PResult<Vec<PropertySpec>> {
        let mut out: Vec<PropertySpec> = Vec::new();
        let mut names: HashSet<String> = HashSet::new();
        while !matches!(self.peek(), Tok::Eof) {
            let span = self.span();
            let explicit = match (self.peek().clone(), self.peek_at(1)) {
                (Tok::Str(s), Tok::Colon) => {
                    self.bump();
                    self.bump();
                    Some(s)
                }
                _ => None,
            };
            let name = explicit.unwrap_or_else(|| format!("prop{}", out.len() + 1));
            if !is_identifier(&name) {
                return Err(Diagnostic::error(
                    span,
                    format!("property name `{name}` must be an identifier"),
                ));
            }
            let (query, path) = self.property_body()?;
            if !names.insert(name.clone()) {
                return Err(Diagnostic::error(
                    span,
                    format!("duplicate property name `{name}`"),
                ));
            }
            out.push(PropertySpec {
                name,
                query,
                path,
                loc: Loc(span),
            });
            self.eat(&Tok::Semi);
        }
        Ok(out)
    }

    fn property_body(&mut self) -> PResult<(Query, PathFormula)> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "P" => {
                self.bump();
                let query = match self.peek() {
                    Tok::QueryEq => {
                        self.bump();
                        Query::Probability
                    }
                    Tok::Ge | Tok::Le => {
                        let op = if matches!(self.bump().tok, Tok::Ge) {
                            BoundOp::AtLeast
                        } else {
                            BoundOp::AtMost
                        };
                        let span = self.span();
                        let neg = self.eat(&Tok::Minus);
                        let b = match self.bump().tok {
                            Tok::Int(i) => i as f64,
                            Tok::Real(r) => r,
                            _ => return Err(Diagnostic::error(span, "expected probability bound")),
                        };
                        let b = if neg { -b } else { b };
                        if !(0.0..=1.0).contains(&b) {
                            return Err(Diagnostic::error(
                                span,
                                format!("probability bound {b} outside [0,1]"),
                            ));
                        }
                        Query::ProbabilityBound { op, bound: b }
                    }
                    Tok::Gt | Tok::Lt => return Err(self.unsupported("strict probability bounds")),
                    _ => return Err(self.error_here("`=?`, `>=` or `<=` after `P`")),
                };
                let path = self.bracketed_path()?;
                Ok((query, path))
            }
            Tok::Ident(s) if s == "R" => {
                self.bump();
                if !matches!(self.peek(), Tok::LBrace) {
                    return Err(self.error_here("`{\"name\"}` naming a reward structure"));
                }
                self.bump();
                let structure = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.error_here("reward structure name in quotes")),
                };
                self.expect(&Tok::RBrace, "`}`")?;
                if !matches!(self.peek(), Tok::QueryEq) {
                    return Err(self.unsupported("reward bounds (only `=?` queries)"));
                }
                self.bump();
                let span = self.span();
                let path = self.bracketed_path()?;
                if !matches!(path, PathFormula::Eventually(_)) {
                    return Err(Diagnostic::error(
                        span,
                        "reward queries support only reachability paths `F φ`",
                    ));
                }
                Ok((Query::Reward { structure }, path))
            }
            Tok::Ident(s) if s == "const" || s == "label" => {
                Err(self.unsupported(&format!("`{s}` declaration in property file")))
            }
            Tok::Ident(s) if s == "S" => Err(self.unsupported("steady-state operator")),
            _ => Err(self.error_here("`P` or `R` operator")),
        }
    }

    fn bracketed_path(&mut self) -> PResult<PathFormula> {
        self.expect(&Tok::LBracket, "`[`")?;
        let path = if self.at_kw("F") {
            self.bump();
            if self.eat(&Tok::Le) {
                let span = self.span();
                let steps = match self.bump().tok {
                    Tok::Int(k) if k >= 0 && k <= u32::MAX as i64 => k as u32,
                    _ => return Err(Diagnostic::error(span, "expected a nonnegative step bound")),
                };
                PathFormula::BoundedEventually {
                    steps,
                    target: self.expr()?,
                }
            } else if matches!(self.peek(), Tok::Lt | Tok::Ge | Tok::Gt) {
                return Err(self.unsupported("time bounds other than `<=k`"));
            } else {
                PathFormula::Eventually(self.expr()?)
            }
        } else if self.at_kw("G") {
            self.bump();
            PathFormula::Globally(self.expr()?)
        } else if self.at_kw("X") {
            return Err(self.unsupported("next operator `X`"));
        } else {
            let lhs = self.expr()?;
            if !self.at_kw("U") {
                return Err(self.error_here("`U` in until formula"));
            }
            self.bump();
            if matches!(self.peek(), Tok::Le) {
                return Err(self.unsupported("bounded until"));
            }
            PathFormula::Until(lhs, self.expr()?)
        };
        self.expect(&Tok::RBracket, "`]`")?;
        Ok(path)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Duplicate identifiers and assignments to undeclared variables.
fn check_declarations<'a>(ast: &'a ModelAst) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut seen: HashSet<&'a str> = HashSet::new();
    let mut declare = |name: &'a str, span: &SourceSpan, diags: &mut Vec<Diagnostic>| {
        if !seen.insert(name) {
            diags.push(Diagnostic::error(
                span.clone(),
                format!("duplicate identifier `{name}`"),
            ));
        }
    };
    for c in &ast.constants {
        declare(&c.name, &c.loc.0, &mut diags);
    }
    for f in &ast.formulas {
        declare(&f.name, &f.loc.0, &mut diags);
    }
    for m in &ast.modules {
        for v in &m.vars {
            declare(&v.name, &v.loc.0, &mut diags);
        }
    }
    let mut modules = HashSet::new();
    for m in &ast.modules {
        if !modules.insert(m.name.as_str()) {
            diags.push(Diagnostic::error(
                m.loc.0.clone(),
                format!("duplicate module `{}`", m.name),
            ));
        }
    }
    let mut rewards = HashSet::new();
    for r in &ast.rewards {
        if !rewards.insert(r.name.as_str()) {
            diags.push(Diagnostic::error(
                r.loc.0.clone(),
                format!("duplicate reward structure \"{}\"", r.name),
            ));
        }
    }
    let vars: HashSet<&str> = ast
        .modules
        .iter()
        .flat_map(|m| m.vars.iter().map(|v| v.name.as_str()))
        .collect();
    for m in &ast.modules {
        for c in &m.commands {
            for u in &c.updates {
                for a in &u.assignments {
                    if !vars.contains(a.var.as_str()) {
                        diags.push(Diagnostic::error(
                            c.loc.0.clone(),
                            format!("update assigns undeclared variable `{}`", a.var),
                        ));
                    }
                }
            }
        }
    }
    diags
}
