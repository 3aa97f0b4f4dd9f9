//! Probabilistic model checking over an explicit state space.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::hash::sha256_fields;
use crate::model::{BoundOp, PathFormula, PropertySpec, Query};
use crate::statespace::{label_states, LabelError, SparseMatrix, StateSet, StateSpace};

/// Results within this distance of a bound are flagged as marginal.
pub const MARGINAL_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Jacobi,
    #[default]
    GaussSeidel,
}

impl Method {
    fn tag(self) -> &'static str {
        match self {
            Method::Jacobi => "explicit-jacobi",
            Method::GaussSeidel => "explicit-gauss-seidel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 1e-9,
            max_iterations: 100_000,
            method: Method::GaussSeidel,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(EngineError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(EngineError::Config(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// States from which `phi U psi` has probability zero.
pub fn prob0(matrix: &SparseMatrix, phi: &StateSet, psi: &StateSet) -> StateSet {
    backward_reach(&matrix.predecessors(), psi, phi).complement()
}

/// States that reach `target` along paths whose other states lie in `through`.
fn backward_reach(pre: &[Vec<usize>], target: &StateSet, through: &StateSet) -> StateSet {
    let mut seen = target.clone();
    let mut stack: Vec<usize> = target.iter().collect();
    while let Some(t) = stack.pop() {
        for &s in &pre[t] {
            if through.contains(s) && seen.insert(s) {
                stack.push(s);
            }
        }
    }
    seen
}

/// States from which `phi U psi` holds with probability one, by the
/// nested greatest/least fixpoint.
pub fn prob1(matrix: &SparseMatrix, phi: &StateSet, psi: &StateSet) -> StateSet {
    let n = matrix.rows();
    let pre = matrix.predecessors();
    let mut u = StateSet::full(n);
    loop {
        // states whose successors all stay inside u
        let closed: Vec<bool> = (0..n)
            .map(|s| matrix.row(s).all(|(t, p)| p == 0.0 || u.contains(t)))
            .collect();
        let mut r = psi.and(&u);
        let mut stack: Vec<usize> = r.iter().collect();
        while let Some(t) = stack.pop() {
            for &s in &pre[t] {
                if !r.contains(s) && u.contains(s) && phi.contains(s) && closed[s] {
                    r.insert(s);
                    stack.push(s);
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Solves `x = A x + b` on the `unknown` states, with `x` fixed elsewhere.
/// Self-loops are eliminated before iterating.
fn solve(
    matrix: &SparseMatrix,
    unknown: &StateSet,
    x: &mut [f64],
    b: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveStats, EngineError> {
    cfg.validate()?;
    let todo: Vec<usize> = unknown.iter().collect();
    if todo.is_empty() {
        return Ok(SolveStats::default());
    }
    let diag: Vec<f64> = todo
        .iter()
        .map(|&s| {
            1.0 - matrix
                .row(s)
                .filter(|(t, _)| *t == s)
                .map(|(_, p)| p)
                .sum::<f64>()
        })
        .collect();
    let mut prev = x.to_vec();
    let mut residual = f64::INFINITY;
    for iter in 1..=cfg.max_iterations {
        if cfg.method == Method::Jacobi {
            prev.copy_from_slice(x);
        }
        residual = 0.0;
        let mut converged = true;
        for (k, &s) in todo.iter().enumerate() {
            let src: &[f64] = if cfg.method == Method::Jacobi {
                &prev
            } else {
                x
            };
            let mut acc = b[s];
            for (t, p) in matrix.row(s) {
                if t != s {
                    acc += p * src[t];
                }
            }
            let new = acc / diag[k];
            let diff = (new - x[s]).abs();
            if diff > cfg.epsilon * new.abs().max(1.0) {
                converged = false;
            }
            residual = residual.max(diff);
            x[s] = new;
        }
        if converged {
            return Ok(SolveStats {
                iterations: iter,
                residual,
            });
        }
    }
    Err(EngineError::NoConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Per-state probability of `phi U psi`.
pub fn until_probability(
    matrix: &SparseMatrix,
    phi: &StateSet,
    psi: &StateSet,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), EngineError> {
    let zero = prob0(matrix, phi, psi);
    let one = prob1(matrix, phi, psi);
    let mut x: Vec<f64> = (0..matrix.rows())
        .map(|s| if one.contains(s) { 1.0 } else { 0.0 })
        .collect();
    let unknown = zero.or(&one).complement();
    let b = vec![0.0; matrix.rows()];
    let stats = solve(matrix, &unknown, &mut x, &b, cfg)?;
    for v in &mut x {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((x, stats))
}

pub fn eventually_probability(
    matrix: &SparseMatrix,
    psi: &StateSet,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), EngineError> {
    until_probability(matrix, &StateSet::full(matrix.rows()), psi, cfg)
}

/// Per-state probability that `phi` holds forever, as `1 - P(F !phi)`.
pub fn globally_probability(
    matrix: &SparseMatrix,
    phi: &StateSet,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), EngineError> {
    let (x, stats) = eventually_probability(matrix, &phi.complement(), cfg)?;
    Ok((x.into_iter().map(|v| 1.0 - v).collect(), stats))
}

/// Probability of reaching `psi` within `k` steps through `phi` states.
pub fn bounded_until_probability(
    matrix: &SparseMatrix,
    phi: &StateSet,
    psi: &StateSet,
    k: u32,
) -> Vec<f64> {
    let n = matrix.rows();
    let mut x: Vec<f64> = (0..n)
        .map(|s| if psi.contains(s) { 1.0 } else { 0.0 })
        .collect();
    let mut next = x.clone();
    for _ in 0..k {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = if psi.contains(s) {
                1.0
            } else if phi.contains(s) {
                matrix.row(s).map(|(t, p)| p * x[t]).sum::<f64>().min(1.0)
            } else {
                0.0
            };
        }
        std::mem::swap(&mut x, &mut next);
    }
    x
}

pub fn bounded_eventually_probability(matrix: &SparseMatrix, psi: &StateSet, k: u32) -> Vec<f64> {
    bounded_until_probability(matrix, &StateSet::full(matrix.rows()), psi, k)
}

/// States that reach `psi` within `k` steps with positive probability
/// (`all = false`) or with probability one (`all = true`).
fn bounded_reach_qualitative(matrix: &SparseMatrix, psi: &StateSet, k: u32, all: bool) -> StateSet {
    let n = matrix.rows();
    let mut r = psi.clone();
    for _ in 0..k {
        let bits = (0..n)
            .map(|s| {
                psi.contains(s)
                    || if all {
                        matrix.row(s).all(|(t, p)| p == 0.0 || r.contains(t))
                    } else {
                        matrix.row(s).any(|(t, p)| p > 0.0 && r.contains(t))
                    }
            })
            .collect();
        let next = StateSet::from_bits(bits);
        if next == r {
            break;
        }
        r = next;
    }
    r
}

/// Expected accumulated state reward, or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reward {
    Finite(f64),
    Infinite,
}

impl Reward {
    pub fn finite(self) -> Option<f64> {
        match self {
            Reward::Finite(v) => Some(v),
            Reward::Infinite => None,
        }
    }
}

/// Expected reward accumulated before reaching `psi`. States that miss
/// `psi` with positive probability get [`Reward::Infinite`].
pub fn reach_reward(
    space: &StateSpace,
    reward: &str,
    psi: &StateSet,
    cfg: &SolverConfig,
) -> Result<(Vec<Reward>, SolveStats), EngineError> {
    let rew = space
        .reward(reward)
        .ok_or_else(|| EngineError::UnknownReward(reward.to_string()))?;
    reach_reward_vector(space.matrix(), rew, psi, cfg)
}

/// [`reach_reward`] over a bare matrix and state-reward vector.
pub fn reach_reward_vector(
    matrix: &SparseMatrix,
    rew: &[f64],
    psi: &StateSet,
    cfg: &SolverConfig,
) -> Result<(Vec<Reward>, SolveStats), EngineError> {
    let n = matrix.rows();
    let sure = prob1(matrix, &StateSet::full(n), psi);
    let unknown = sure.minus(psi);
    let mut x = vec![0.0; n];
    let b: Vec<f64> = (0..n)
        .map(|s| if unknown.contains(s) { rew[s] } else { 0.0 })
        .collect();
    let stats = solve(matrix, &unknown, &mut x, &b, cfg)?;
    let out = (0..n)
        .map(|s| {
            if sure.contains(s) {
                Reward::Finite(x[s])
            } else {
                Reward::Infinite
            }
        })
        .collect();
    Ok((out, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Probability,
    Boolean,
    Reward,
}

impl fmt::Display for ResultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResultKind::Probability => "probability",
            ResultKind::Boolean => "boolean",
            ResultKind::Reward => "reward",
        })
    }
}

/// Numeric part of a result. Serialised as a JSON number, or as the string
/// `"+infinity"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResultValue {
    Number(f64),
    Infinity,
}

impl ResultValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ResultValue::Number(v) => v,
            ResultValue::Infinity => f64::INFINITY,
        }
    }

    /// Full-precision text, used in fingerprints.
    pub fn exact_text(self) -> String {
        match self {
            ResultValue::Number(v) => format!("{v:?}"),
            ResultValue::Infinity => "+infinity".into(),
        }
    }
}

impl fmt::Display for ResultValue {
    /// Six significant digits with trailing zeros trimmed.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResultValue::Infinity => f.write_str("+infinity"),
            ResultValue::Number(v) => f.write_str(&format_significant(*v, 6)),
        }
    }
}

/// Formats `v` with `digits` significant digits, dropping trailing zeros.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        let s = format!("{:.*e}", digits - 1, v);
        let (mant, exp) = s.split_once('e').unwrap();
        let mant = trim_zeros(mant);
        return format!("{mant}e{exp}");
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding may add a digit (e.g. 9.999995 -> 10.00000)
    trim_zeros(&s).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl Serialize for ResultValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ResultValue::Number(v) => s.serialize_f64(*v),
            ResultValue::Infinity => s.serialize_str("+infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for ResultValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ResultValue::Number(v)),
            Repr::Text(t) if t == "+infinity" || t == "inf" => Ok(ResultValue::Infinity),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad result value `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub name: String,
    pub formula: String,
    pub kind: ResultKind,
    /// Initial-state value; absent for bounds decided by graph analysis.
    pub value: Option<ResultValue>,
    /// Present iff `kind` is boolean.
    pub verdict: Option<bool>,
    /// Numeric bound result within [`MARGINAL_BAND`] of the bound.
    #[serde(default)]
    pub marginal: bool,
    pub iterations: usize,
    pub residual: f64,
    pub wall_ms: f64,
    pub engine: String,
    /// Hash of the bound model and the property text.
    pub model_fingerprint: String,
    /// Hash of name, kind, value and verdict (statistics excluded).
    pub fingerprint: String,
}

impl VerificationResult {
    pub fn compute_fingerprint(&self) -> String {
        let value = self.value.map(ResultValue::exact_text).unwrap_or_default();
        let verdict = self.verdict.map(|b| b.to_string()).unwrap_or_default();
        let kind = self.kind.to_string();
        sha256_fields([self.name.as_str(), &kind, &value, &verdict])
    }

    /// Short human-readable outcome: `holds`/`violated` for bounds, the
    /// rounded value otherwise.
    pub fn summary(&self) -> String {
        match (self.verdict, self.value) {
            (Some(true), _) => "holds".into(),
            (Some(false), _) => "violated".into(),
            (None, Some(v)) => v.to_string(),
            (None, None) => "unknown".into(),
        }
    }
}

fn outcome_of(
    space: &StateSpace,
    prop: &PropertySpec,
    cfg: &SolverConfig,
) -> Result<Outcome, EngineError> {
    let m = space.matrix();
    let n = m.rows();
    let init = space.initial();
    let label = |e| label_states(space, e);
    match &prop.query {
        Query::Reward { structure } => {
            let target = match &prop.path {
                PathFormula::Eventually(e) => label(e)?,
                // the parser only admits F for rewards
                other => unreachable!("reward path {other}"),
            };
            let (r, stats) = reach_reward(space, structure, &target, cfg)?;
            let value = match r[init] {
                Reward::Finite(v) => ResultValue::Number(v),
                Reward::Infinite => ResultValue::Infinity,
            };
            Ok(Outcome::numeric(ResultKind::Reward, value, stats, cfg))
        }
        Query::Probability => {
            let (x, stats) = probability_vector(space, &prop.path, cfg)?;
            Ok(Outcome::numeric(
                ResultKind::Probability,
                ResultValue::Number(x[init]),
                stats,
                cfg,
            ))
        }
        Query::ProbabilityBound { op, bound } => {
            let qualitative = match (op, *bound) {
                (BoundOp::AtLeast, b) if b <= 0.0 => Some(true),
                (BoundOp::AtMost, b) if b >= 1.0 => Some(true),
                (BoundOp::AtLeast, b) if b >= 1.0 => Some(true),
                (BoundOp::AtMost, b) if b <= 0.0 => Some(false),
                _ => None,
            };
            let Some(at_least_one) = qualitative else {
                let (x, stats) = probability_vector(space, &prop.path, cfg)?;
                let v = x[init];
                let holds = match op {
                    BoundOp::AtLeast => v >= *bound,
                    BoundOp::AtMost => v <= *bound,
                };
                let mut o =
                    Outcome::numeric(ResultKind::Boolean, ResultValue::Number(v), stats, cfg);
                o.verdict = Some(holds);
                o.marginal = (v - bound).abs() <= MARGINAL_BAND;
                return Ok(o);
            };
            let trivial = matches!((op, *bound), (BoundOp::AtLeast, b) if b <= 0.0)
                || matches!((op, *bound), (BoundOp::AtMost, b) if b >= 1.0);
            let holds = if trivial {
                true
            } else {
                let all = StateSet::full(n);
                // P>=1: the path formula holds almost surely.
                // P<=0: the path formula holds with probability zero.
                match &prop.path {
                    PathFormula::Eventually(e) => {
                        let psi = label(e)?;
                        if at_least_one {
                            prob1(m, &all, &psi).contains(init)
                        } else {
                            prob0(m, &all, &psi).contains(init)
                        }
                    }
                    PathFormula::Until(a, b) => {
                        let (phi, psi) = (label(a)?, label(b)?);
                        if at_least_one {
                            prob1(m, &phi, &psi).contains(init)
                        } else {
                            prob0(m, &phi, &psi).contains(init)
                        }
                    }
                    PathFormula::Globally(e) => {
                        let bad = label(e)?.complement();
                        if at_least_one {
                            prob0(m, &all, &bad).contains(init)
                        } else {
                            prob1(m, &all, &bad).contains(init)
                        }
                    }
                    PathFormula::BoundedEventually { steps, target } => {
                        let psi = label(target)?;
                        if at_least_one {
                            bounded_reach_qualitative(m, &psi, *steps, true).contains(init)
                        } else {
                            !bounded_reach_qualitative(m, &psi, *steps, false).contains(init)
                        }
                    }
                }
            };
            Ok(Outcome {
                kind: ResultKind::Boolean,
                value: None,
                verdict: Some(holds),
                marginal: false,
                stats: SolveStats::default(),
                engine: "graph",
            })
        }
    }
}

struct Outcome {
    kind: ResultKind,
    value: Option<ResultValue>,
    verdict: Option<bool>,
    marginal: bool,
    stats: SolveStats,
    engine: &'static str,
}

impl Outcome {
    fn numeric(
        kind: ResultKind,
        value: ResultValue,
        stats: SolveStats,
        cfg: &SolverConfig,
    ) -> Self {
        Outcome {
            kind,
            value: Some(value),
            verdict: None,
            marginal: false,
            stats,
            engine: cfg.method.tag(),
        }
    }
}

fn probability_vector(
    space: &StateSpace,
    path: &PathFormula,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveStats), EngineError> {
    let m = space.matrix();
    let label = |e| label_states(space, e);
    match path {
        PathFormula::Eventually(e) => eventually_probability(m, &label(e)?, cfg),
        PathFormula::Until(a, b) => until_probability(m, &label(a)?, &label(b)?, cfg),
        PathFormula::Globally(e) => globally_probability(m, &label(e)?, cfg),
        PathFormula::BoundedEventually { steps, target } => Ok((
            bounded_eventually_probability(m, &label(target)?, *steps),
            SolveStats {
                iterations: *steps as usize,
                residual: 0.0,
            },
        )),
    }
}

/// Checks one property from the initial state.
pub fn check_property(
    space: &StateSpace,
    prop: &PropertySpec,
    cfg: &SolverConfig,
) -> Result<VerificationResult, EngineError> {
    cfg.validate()?;
    let start = Instant::now();
    let o = outcome_of(space, prop, cfg)?;
    let formula = prop.formula_text();
    let mut r = VerificationResult {
        name: prop.name.clone(),
        model_fingerprint: sha256_fields([space.model().fingerprint(), formula.as_str()]),
        formula,
        kind: o.kind,
        value: o.value,
        verdict: o.verdict,
        marginal: o.marginal,
        iterations: o.stats.iterations,
        residual: o.stats.residual,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        engine: o.engine.to_string(),
        fingerprint: String::new(),
    };
    r.fingerprint = r.compute_fingerprint();
    Ok(r)
}
