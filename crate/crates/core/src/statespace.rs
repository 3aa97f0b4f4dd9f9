//! Explicit-state construction of the DTMC described by a bound model.
//!
//! Exploration is breadth-first from the initial valuation. In each state the
//! enabled *units* are collected: every enabled unlabelled command is a unit
//! on its own, and for each action label the product of enabled commands
//! over all modules declaring that label forms one unit per combination.
//! With `m` units enabled each fires with probability `1/m`. Successors are
//! numbered in lexicographic order of their valuations, so two builds of the
//! same model produce identical state orderings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{BoundCommand, BoundModel, EvalError, Expr, Type};

/// Tolerance on per-command update probabilities summing to one.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildConfig {
    pub max_states: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            max_states: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("in state {state}: {command} assigns {variable} = {value}, outside [{low}..{high}]")]
    RangeViolation {
        state: String,
        command: String,
        variable: String,
        value: i64,
        low: i64,
        high: i64,
    },
    #[error("in state {state}: update probabilities of {command} sum to {sum}, not 1")]
    ProbabilitySum {
        state: String,
        command: String,
        sum: f64,
    },
    #[error("in state {state}: {command} has update probability {value} outside [0,1]")]
    BadProbability {
        state: String,
        command: String,
        value: f64,
    },
    #[error("in state {state}: reward structure \"{reward}\" yields negative reward {value}")]
    NegativeReward {
        state: String,
        reward: String,
        value: f64,
    },
    #[error("state limit of {0} exceeded")]
    StateLimit(usize),
    #[error("in state {state}: {source}")]
    Eval { state: String, source: EvalError },
}

/// Compressed sparse row matrix of transition probabilities.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(rows: &[Vec<(usize, f64)>]) -> Self {
        let mut m = SparseMatrix {
            row_ptr: Vec::with_capacity(rows.len() + 1),
            cols: Vec::new(),
            vals: Vec::new(),
        };
        m.row_ptr.push(0);
        for row in rows {
            for &(c, v) in row {
                m.cols.push(c);
                m.vals.push(v);
            }
            m.row_ptr.push(m.cols.len());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len().saturating_sub(1)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[s], self.row_ptr[s + 1]);
        self.cols[a..b]
            .iter()
            .copied()
            .zip(self.vals[a..b].iter().copied())
    }

    pub fn row_sum(&self, s: usize) -> f64 {
        self.row(s).map(|(_, p)| p).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.rows()).map(|s| self.row(s).collect()).collect()
    }

    /// Predecessor lists (ignoring probability values).
    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pre = vec![Vec::new(); self.rows()];
        for s in 0..self.rows() {
            for (t, p) in self.row(s) {
                if p > 0.0 {
                    pre[t].push(s);
                }
            }
        }
        pre
    }
}

/// A subset of the states of a [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSet {
    bits: Vec<bool>,
}

impl StateSet {
    pub fn empty(universe: usize) -> Self {
        StateSet {
            bits: vec![false; universe],
        }
    }

    pub fn full(universe: usize) -> Self {
        StateSet {
            bits: vec![true; universe],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        StateSet { bits }
    }

    pub fn from_indices(universe: usize, members: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(universe);
        for i in members {
            s.insert(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, s: usize) -> bool {
        self.bits[s]
    }

    pub fn insert(&mut self, s: usize) -> bool {
        !std::mem::replace(&mut self.bits[s], true)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| i)
    }

    pub fn complement(&self) -> Self {
        StateSet {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn and(&self, other: &StateSet) -> Self {
        StateSet {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn or(&self, other: &StateSet) -> Self {
        StateSet {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn minus(&self, other: &StateSet) -> Self {
        StateSet {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && !*b)
                .collect(),
        }
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.bits
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BuildDiagnostics {
    pub deadlock_states_fixed: usize,
    /// Up to ten of the fixed states, as indices.
    pub deadlock_samples: Vec<usize>,
    /// States where more than one unit was enabled (resolved uniformly).
    pub nondeterministic_states: usize,
    /// Always empty in a finished space: range violations abort the build.
    pub range_violations: Vec<String>,
}

/// Explicit reachable state space with its transition matrix and state
/// reward vectors.
#[derive(Debug, Clone)]
pub struct StateSpace {
    model: Arc<BoundModel>,
    states: Vec<Box<[i64]>>,
    initial: usize,
    matrix: SparseMatrix,
    rewards: BTreeMap<String, Vec<f64>>,
    pub diagnostics: BuildDiagnostics,
}

impl StateSpace {
    pub fn model(&self) -> &BoundModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state(&self, s: usize) -> &[i64] {
        &self.states[s]
    }

    pub fn states(&self) -> impl Iterator<Item = &[i64]> {
        self.states.iter().map(|s| &**s)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn reward(&self, name: &str) -> Option<&[f64]> {
        self.rewards.get(name).map(Vec::as_slice)
    }

    pub fn reward_names(&self) -> impl Iterator<Item = &str> {
        self.rewards.keys().map(String::as_str)
    }

    /// Value of a named variable in state `s`.
    pub fn value(&self, s: usize, var: &str) -> Option<i64> {
        self.model.var_index(var).map(|i| self.states[s][i])
    }

    pub fn describe_state(&self, s: usize) -> String {
        describe(&self.model, &self.states[s])
    }

    /// Plain-text triple list `src dst prob`, one transition per line.
    pub fn export_transitions(&self) -> String {
        let mut out = String::new();
        for s in 0..self.len() {
            for (t, p) in self.matrix.row(s) {
                writeln!(out, "{s} {t} {p:?}").unwrap();
            }
        }
        out
    }

    /// State table: header with variable names, then `index:(v1,v2,...)`.
    pub fn export_states(&self) -> String {
        let names: Vec<&str> = self.model.vars.iter().map(|v| v.name.as_str()).collect();
        let mut out = format!("({})\n", names.join(","));
        for (i, s) in self.states.iter().enumerate() {
            let vals: Vec<String> = s
                .iter()
                .zip(&self.model.vars)
                .map(|(v, info)| {
                    if info.is_bool {
                        (*v != 0).to_string()
                    } else {
                        v.to_string()
                    }
                })
                .collect();
            writeln!(out, "{i}:({})", vals.join(",")).unwrap();
        }
        out
    }
}

fn describe(model: &BoundModel, state: &[i64]) -> String {
    let parts: Vec<String> = model
        .vars
        .iter()
        .zip(state)
        .map(|(v, x)| {
            if v.is_bool {
                format!("{}={}", v.name, *x != 0)
            } else {
                format!("{}={x}", v.name)
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

fn command_name(model: &BoundModel, c: &BoundCommand) -> String {
    let label = c.action.as_deref().unwrap_or("");
    format!(
        "command [{label}] #{} of module {} (line {})",
        c.index + 1,
        model.module_names[c.module],
        c.span.line
    )
}

/// Scheduling units: unlabelled commands alone, labelled ones grouped so
/// that each group holds, per participating module, its commands for the
/// label.
struct Units {
    unlabelled: Vec<usize>,
    labelled: Vec<(String, Vec<Vec<usize>>)>,
}

impl Units {
    fn new(model: &BoundModel) -> Self {
        let mut unlabelled = Vec::new();
        let mut by_label: BTreeMap<String, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
        for (ci, c) in model.commands.iter().enumerate() {
            match &c.action {
                None => unlabelled.push(ci),
                Some(a) => by_label
                    .entry(a.clone())
                    .or_default()
                    .entry(c.module)
                    .or_default()
                    .push(ci),
            }
        }
        Units {
            unlabelled,
            labelled: by_label
                .into_iter()
                .map(|(l, mods)| (l, mods.into_values().collect()))
                .collect(),
        }
    }
}

/// Builds the reachable state space. Deadlock states are left with empty
/// rows; pass the result through [`fix_deadlocks`] before analysis.
pub fn build_state_space(model: &BoundModel, cfg: &BuildConfig) -> Result<StateSpace, BuildError> {
    let units = Units::new(model);
    let init: Box<[i64]> = model.initial_valuation().into_boxed_slice();
    let mut index: HashMap<Box<[i64]>, usize> = HashMap::new();
    let mut states: Vec<Box<[i64]>> = vec![init.clone()];
    index.insert(init, 0);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut diagnostics = BuildDiagnostics::default();

    let mut head = 0;
    while head < states.len() {
        let state = states[head].clone();
        head += 1;
        let eval_err = |source: EvalError| BuildError::Eval {
            state: describe(model, &state),
            source,
        };

        let mut enabled = vec![false; model.commands.len()];
        for (ci, c) in model.commands.iter().enumerate() {
            enabled[ci] = c.guard.eval_bool(&state).map_err(eval_err)?;
        }
        let mut chosen: Vec<Vec<usize>> = units
            .unlabelled
            .iter()
            .filter(|&&ci| enabled[ci])
            .map(|&ci| vec![ci])
            .collect();
        for (_, per_module) in &units.labelled {
            let options: Vec<Vec<usize>> = per_module
                .iter()
                .map(|cmds| cmds.iter().copied().filter(|&ci| enabled[ci]).collect())
                .collect();
            if options.iter().any(Vec::is_empty) {
                continue;
            }
            let mut combos: Vec<Vec<usize>> = vec![Vec::new()];
            for opts in &options {
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        opts.iter().map(move |&ci| {
                            let mut next = prefix.clone();
                            next.push(ci);
                            next
                        })
                    })
                    .collect();
            }
            chosen.extend(combos);
        }

        if chosen.len() > 1 {
            diagnostics.nondeterministic_states += 1;
        }
        let share = 1.0 / chosen.len().max(1) as f64;
        let mut successors: BTreeMap<Box<[i64]>, f64> = BTreeMap::new();
        for unit in &chosen {
            // distribution of each command, checked to sum to one
            let mut dists: Vec<Vec<(f64, usize)>> = Vec::with_capacity(unit.len());
            for &ci in unit {
                let c = &model.commands[ci];
                let mut dist = Vec::with_capacity(c.updates.len());
                let mut sum = 0.0;
                for (ui, u) in c.updates.iter().enumerate() {
                    let p = u.prob.eval_f64(&state).map_err(eval_err)?;
                    if !(0.0..=1.0 + PROBABILITY_SUM_TOLERANCE).contains(&p) || p.is_nan() {
                        return Err(BuildError::BadProbability {
                            state: describe(model, &state),
                            command: command_name(model, c),
                            value: p,
                        });
                    }
                    sum += p;
                    dist.push((p, ui));
                }
                if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(BuildError::ProbabilitySum {
                        state: describe(model, &state),
                        command: command_name(model, c),
                        sum,
                    });
                }
                dists.push(dist);
            }
            // product of the per-command distributions
            let mut outcomes: Vec<(f64, Vec<usize>)> = vec![(1.0, Vec::new())];
            for dist in &dists {
                outcomes = outcomes
                    .into_iter()
                    .flat_map(|(p, picks)| {
                        dist.iter().map(move |&(q, ui)| {
                            let mut picks = picks.clone();
                            picks.push(ui);
                            (p * q, picks)
                        })
                    })
                    .collect();
            }
            for (p, picks) in outcomes {
                if p == 0.0 {
                    continue;
                }
                let mut next = state.clone();
                for (&ci, &ui) in unit.iter().zip(&picks) {
                    let c = &model.commands[ci];
                    for (var, e) in &c.updates[ui].assignments {
                        let v = e.eval(&state).map_err(eval_err)?;
                        let info = &model.vars[*var];
                        let raw = match (info.is_bool, v) {
                            (true, v) => v.as_bool().map(i64::from),
                            (false, v) => v.as_int(),
                        }
                        .ok_or_else(|| {
                            eval_err(EvalError::Type(format!(
                                "bad value {v} for `{}`",
                                info.name
                            )))
                        })?;
                        if raw < info.low || raw > info.high {
                            return Err(BuildError::RangeViolation {
                                state: describe(model, &state),
                                command: command_name(model, c),
                                variable: info.name.clone(),
                                value: raw,
                                low: info.low,
                                high: info.high,
                            });
                        }
                        next[*var] = raw;
                    }
                }
                *successors.entry(next).or_insert(0.0) += p * share;
            }
        }

        let mut row = Vec::with_capacity(successors.len());
        for (succ, p) in successors {
            let id = match index.get(&succ) {
                Some(&id) => id,
                None => {
                    if states.len() >= cfg.max_states {
                        return Err(BuildError::StateLimit(cfg.max_states));
                    }
                    states.push(succ.clone());
                    index.insert(succ, states.len() - 1);
                    states.len() - 1
                }
            };
            row.push((id, p));
        }
        row.sort_by_key(|(t, _)| *t);
        rows.push(row);
    }

    let mut rewards = BTreeMap::new();
    for r in &model.rewards {
        let mut vec = Vec::with_capacity(states.len());
        for state in &states {
            let mut total = 0.0;
            for (guard, value) in &r.items {
                let err = |source| BuildError::Eval {
                    state: describe(model, state),
                    source,
                };
                if guard.eval_bool(state).map_err(err)? {
                    total += value.eval_f64(state).map_err(err)?;
                }
            }
            if total < 0.0 {
                return Err(BuildError::NegativeReward {
                    state: describe(model, state),
                    reward: r.name.clone(),
                    value: total,
                });
            }
            vec.push(total);
        }
        rewards.insert(r.name.clone(), vec);
    }

    Ok(StateSpace {
        model: Arc::new(model.clone()),
        states,
        initial: 0,
        matrix: SparseMatrix::from_rows(&rows),
        rewards,
        diagnostics,
    })
}

/// Gives every state without outgoing transitions a probability-one self
/// loop. Idempotent.
pub fn fix_deadlocks(mut space: StateSpace) -> StateSpace {
    let mut rows = space.matrix.to_rows();
    let mut fixed = 0;
    for (s, row) in rows.iter_mut().enumerate() {
        if row.is_empty() {
            row.push((s, 1.0));
            fixed += 1;
            if space.diagnostics.deadlock_samples.len() < 10 {
                space.diagnostics.deadlock_samples.push(s);
            }
        }
    }
    if fixed > 0 {
        space.matrix = SparseMatrix::from_rows(&rows);
        space.diagnostics.deadlock_states_fixed += fixed;
    }
    space
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("state predicate `{expr}` has type {found}, expected bool")]
    NotBoolean { expr: String, found: Type },
    #[error("state predicate `{expr}`: {message}")]
    Invalid { expr: String, message: String },
    #[error("evaluating `{expr}` in state {state}: {source}")]
    Eval {
        expr: String,
        state: String,
        source: EvalError,
    },
}

/// The exact set of states satisfying a boolean state predicate.
pub fn label_states(space: &StateSpace, predicate: &Expr) -> Result<StateSet, LabelError> {
    let expr = predicate.to_string();
    match space.model.typed().type_of(predicate) {
        Ok(Type::Bool) => {}
        Ok(found) => return Err(LabelError::NotBoolean { expr, found }),
        Err(message) => return Err(LabelError::Invalid { expr, message }),
    }
    let compiled = space
        .model
        .compile(predicate)
        .map_err(|e| LabelError::Invalid {
            expr: expr.clone(),
            message: e.to_string(),
        })?;
    let mut bits = Vec::with_capacity(space.len());
    for (i, s) in space.states.iter().enumerate() {
        bits.push(compiled.eval_bool(s).map_err(|source| LabelError::Eval {
            expr: expr.clone(),
            state: space.describe_state(i),
            source,
        })?);
    }
    Ok(StateSet::from_bits(bits))
}
