//! Exact-rational reference oracle.
//!
//! Independent of the crate under test: the case-study chain is transcribed
//! by hand from the model listing, explored breadth-first, and every query
//! is answered with rational arithmetic (graph precomputation + sparse
//! Gaussian elimination).

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact sparse chain: `rows[s]` lists `(successor, probability)`.
#[derive(Clone, Debug)]
pub struct ExactChain {
    pub rows: Vec<Vec<(usize, Q)>>,
    pub initial: usize,
}

impl ExactChain {
    /// Converts a floating-point transition list to exact rationals
    /// (every f64 is a dyadic rational, so nothing is lost).
    pub fn from_float_rows(rows: &[Vec<(usize, f64)>], initial: usize) -> Self {
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&(t, p)| (t, BigRational::from_float(p).expect("finite probability")))
                    .collect()
            })
            .collect();
        ExactChain { rows, initial }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    fn predecessors(&self) -> Vec<Vec<usize>> {
        let mut pre = vec![Vec::new(); self.len()];
        for (s, row) in self.rows.iter().enumerate() {
            for (t, p) in row {
                if !p.is_zero() {
                    pre[*t].push(s);
                }
            }
        }
        pre
    }

    /// States that reach `psi` through `phi` states with positive probability.
    pub fn can_reach(&self, phi: &[bool], psi: &[bool]) -> Vec<bool> {
        let pre = self.predecessors();
        let mut seen = psi.to_vec();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&s| psi[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &pre[t] {
                if !seen[s] && phi[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    /// Probability-one states for `phi U psi`, computed as the complement of
    /// states that can reach a probability-zero state via `phi & !psi`.
    pub fn prob1(&self, phi: &[bool], psi: &[bool]) -> Vec<bool> {
        let reach = self.can_reach(phi, psi);
        let zero: Vec<bool> = reach.iter().map(|r| !r).collect();
        let mid: Vec<bool> = (0..self.len()).map(|s| phi[s] && !psi[s]).collect();
        let bad = self.can_reach(&mid, &zero);
        bad.iter().map(|b| !b).collect()
    }

    /// Exact `P(phi U psi)` per state.
    pub fn until(&self, phi: &[bool], psi: &[bool]) -> Vec<Q> {
        let reach = self.can_reach(phi, psi);
        let one = self.prob1(phi, psi);
        let unknown: Vec<usize> = (0..self.len()).filter(|&s| reach[s] && !one[s]).collect();
        let mut x: Vec<Q> = (0..self.len())
            .map(|s| if one[s] { Q::one() } else { Q::zero() })
            .collect();
        let solved = self.solve_restricted(&unknown, |s| {
            self.rows[s]
                .iter()
                .filter(|(t, _)| one[*t])
                .fold(Q::zero(), |acc, (_, p)| acc + p)
        });
        for (s, v) in solved {
            x[s] = v;
        }
        x
    }

    /// Exact expected reward to reach `psi`; `None` stands for infinity.
    pub fn reach_reward(&self, reward: &[Q], psi: &[bool]) -> Vec<Option<Q>> {
        let all = vec![true; self.len()];
        let one = self.prob1(&all, psi);
        let unknown: Vec<usize> = (0..self.len()).filter(|&s| one[s] && !psi[s]).collect();
        let solved: HashMap<usize, Q> = self
            .solve_restricted(&unknown, |s| reward[s].clone())
            .into_iter()
            .collect();
        (0..self.len())
            .map(|s| {
                if psi[s] {
                    Some(Q::zero())
                } else if !one[s] {
                    None
                } else {
                    Some(solved[&s].clone())
                }
            })
            .collect()
    }

    /// Exact `P(F<=k psi)` per state by k backward steps.
    pub fn bounded_eventually(&self, psi: &[bool], k: usize) -> Vec<Q> {
        let mut x: Vec<Q> = psi
            .iter()
            .map(|&b| if b { Q::one() } else { Q::zero() })
            .collect();
        for _ in 0..k {
            x = (0..self.len())
                .map(|s| {
                    if psi[s] {
                        Q::one()
                    } else {
                        self.rows[s]
                            .iter()
                            .fold(Q::zero(), |acc, (t, p)| acc + p * &x[*t])
                    }
                })
                .collect();
        }
        x
    }

    /// Solves `x_s = sum_{t in unknown} P(s,t) x_t + b(s)` for `s in unknown`
    /// by sparse Gaussian elimination on `(I - P) x = b`.
    fn solve_restricted(&self, unknown: &[usize], b: impl Fn(usize) -> Q) -> Vec<(usize, Q)> {
        let pos: HashMap<usize, usize> = unknown.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let n = unknown.len();
        let mut rows: Vec<BTreeMap<usize, Q>> = Vec::with_capacity(n);
        let mut rhs: Vec<Q> = Vec::with_capacity(n);
        for &s in unknown {
            let mut row = BTreeMap::new();
            row.insert(pos[&s], Q::one());
            for (t, p) in &self.rows[s] {
                if let Some(&j) = pos.get(t) {
                    let e = row.entry(j).or_insert_with(Q::zero);
                    *e = &*e - p;
                }
            }
            row.retain(|_, v: &mut Q| !v.is_zero());
            rows.push(row);
            rhs.push(b(s));
        }
        // column index -> rows holding a nonzero in that column
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in rows.iter().enumerate() {
            for &j in row.keys() {
                col_rows[j].push(i);
            }
        }
        for k in 0..n {
            let pivot = rows[k].get(&k).cloned().expect("nonsingular M-matrix");
            assert!(pivot.is_positive());
            let pivot_row = rows[k].clone();
            let pivot_rhs = rhs[k].clone();
            let targets: Vec<usize> = col_rows[k].iter().copied().filter(|&i| i > k).collect();
            for i in targets {
                let Some(f) = rows[i].get(&k).cloned() else {
                    continue;
                };
                let factor = f / &pivot;
                for (j, v) in &pivot_row {
                    let e = rows[i].entry(*j).or_insert_with(|| {
                        col_rows[*j].push(i);
                        Q::zero()
                    });
                    *e = &*e - &factor * v;
                }
                rows[i].retain(|_, v| !v.is_zero());
                rhs[i] = &rhs[i] - &factor * &pivot_rhs;
            }
        }
        let mut x = vec![Q::zero(); n];
        for k in (0..n).rev() {
            let mut acc = rhs[k].clone();
            for (j, v) in &rows[k] {
                if *j > k {
                    acc -= v * &x[*j];
                }
            }
            x[k] = acc / &rows[k][&k];
        }
        unknown.iter().copied().zip(x).collect()
    }
}

pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().expect("representable")
}

/// Case-study state: (loc, batt, rad, sw, vel, op_used).
pub type CsState = [i64; 6];

#[derive(Clone, Debug)]
pub struct CsParams {
    pub p_rad_crit: Q,
    pub p_rad_med: Q,
    pub p_err: Q,
    pub batt_dec: i64,
    pub batt_dec_cm: i64,
    pub batt_threshold: i64,
}

impl Default for CsParams {
    fn default() -> Self {
        CsParams {
            p_rad_crit: q(2, 100),
            p_rad_med: q(8, 100),
            p_err: q(1, 100),
            batt_dec: 20,
            batt_dec_cm: 10,
            batt_threshold: 30,
        }
    }
}

pub struct CaseStudy {
    pub states: Vec<CsState>,
    pub chain: ExactChain,
}

/// Hand transcription of the inspection-robot DTMC: each enabled command is a
/// scheduling unit (the two labelled wrapper commands are not shared with the
/// navigator so they fire alone), units are chosen uniformly, zero-probability
/// branches are dropped, successors are discovered in lexicographic order.
pub fn case_study(p: &CsParams) -> CaseStudy {
    type Dist = Vec<(Q, CsState)>;
    let units = |s: &CsState| -> Vec<Dist> {
        let [loc, batt, rad, sw, _vel, _op] = *s;
        let mut out: Vec<Dist> = Vec::new();
        let move_dist = |dec: i64| -> Dist {
            let keep = Q::one() - &p.p_err;
            let safe = Q::one() - &p.p_rad_crit - &p.p_rad_med;
            let mut d = Vec::new();
            let mut with = |pr: Q, l: i64, r: i64| {
                let mut t = *s;
                t[0] = l;
                t[1] = batt - dec;
                t[2] = r;
                d.push((pr, t));
            };
            with(p.p_err.clone(), 5, rad);
            with(&keep * &p.p_rad_crit, loc + 1, 2);
            with(&keep * &p.p_rad_med, loc + 1, 1);
            with(&keep * &safe, loc + 1, 0);
            d
        };
        // navigator
        if loc < 4 && batt < p.batt_threshold {
            let mut t = *s;
            t[0] = 6;
            out.push(vec![(Q::one(), t)]);
        }
        if loc < 4 && batt >= p.batt_threshold && batt >= p.batt_dec && sw == 0 {
            out.push(move_dist(p.batt_dec));
        }
        if loc < 4 && batt >= p.batt_threshold && batt >= p.batt_dec_cm && sw == 1 {
            out.push(move_dist(p.batt_dec_cm));
        }
        if loc < 4 && sw == 2 && batt >= p.batt_threshold {
            out.push(vec![(Q::one(), *s)]);
        }
        if loc >= 4 {
            out.push(vec![(Q::one(), *s)]);
        }
        // safety wrapper
        if sw == 0 && rad == 1 {
            let mut t = *s;
            t[3] = 1;
            t[4] = 1;
            out.push(vec![(Q::one(), t)]);
        }
        if sw <= 1 && rad == 2 {
            let mut t = *s;
            t[3] = 2;
            t[4] = 0;
            out.push(vec![(Q::one(), t)]);
        }
        if sw == 2 {
            let mut t = *s;
            t[4] = 0;
            out.push(vec![(Q::one(), t)]);
        }
        if sw == 0 {
            // [hdng] and [vel]
            for _ in 0..2 {
                let mut t = *s;
                t[5] = 1;
                out.push(vec![(Q::one(), t)]);
            }
        }
        out
    };

    let init: CsState = [0, 100, 0, 0, 2, 0];
    let mut index: HashMap<CsState, usize> = HashMap::new();
    let mut states = vec![init];
    index.insert(init, 0);
    let mut rows: Vec<Vec<(usize, Q)>> = Vec::new();
    let mut head = 0;
    while head < states.len() {
        let s = states[head];
        head += 1;
        let us = units(&s);
        assert!(!us.is_empty(), "oracle: deadlock at {s:?}");
        let m = Q::from_integer(BigInt::from(us.len()));
        let mut succ: BTreeMap<CsState, Q> = BTreeMap::new();
        for d in us {
            for (pr, t) in d {
                if pr.is_zero() {
                    continue;
                }
                let e = succ.entry(t).or_insert_with(Q::zero);
                *e = &*e + pr / &m;
            }
        }
        let mut row = Vec::new();
        for (t, pr) in succ {
            let id = *index.entry(t).or_insert_with(|| {
                states.push(t);
                states.len() - 1
            });
            row.push((id, pr));
        }
        rows.push(row);
    }
    CaseStudy {
        states,
        chain: ExactChain { rows, initial: 0 },
    }
}

/// Exact answer for a Table 2 property.
#[derive(Clone, Debug, PartialEq)]
pub enum Answer {
    Prob(Q),
    Reward(Option<Q>),
    Verdict(bool),
}

impl CaseStudy {
    pub fn mark(&self, f: impl Fn(&CsState) -> bool) -> Vec<bool> {
        self.states.iter().map(f).collect()
    }

    /// All seventeen named properties, in file order.
    pub fn table2(&self, p: &CsParams) -> Vec<(&'static str, Answer)> {
        let c = &self.chain;
        let s0 = c.initial;
        let all = vec![true; c.len()];
        let not = |v: &[bool]| v.iter().map(|b| !b).collect::<Vec<bool>>();
        let at = |l: i64| self.mark(|s| s[0] == l);
        let term = self.mark(|s| s[0] >= 4);
        let prob = |v: Vec<Q>| Answer::Prob(v[s0].clone());
        let one_minus = |v: Vec<Q>| Answer::Prob(Q::one() - &v[s0]);
        let reward = |f: &dyn Fn(&CsState) -> i64| {
            let r: Vec<Q> = self
                .states
                .iter()
                .map(|s| Q::from_integer(f(s).into()))
                .collect();
            Answer::Reward(c.reach_reward(&r, &term)[s0].clone())
        };
        let p_ge1_f = |psi: Vec<bool>| Answer::Verdict(c.prob1(&all, &psi)[s0]);
        let p_ge1_g = |phi: Vec<bool>| Answer::Verdict(!c.can_reach(&all, &not(&phi))[s0]);
        let p_le0_f = |psi: Vec<bool>| Answer::Verdict(!c.can_reach(&all, &psi)[s0]);
        vec![
            ("P_succ", prob(c.until(&all, &at(4)))),
            ("P_forb", prob(c.until(&all, &at(5)))),
            ("P_safe", one_minus(c.until(&all, &at(5)))),
            ("P_condSucc", prob(c.until(&not(&at(5)), &at(4)))),
            (
                "P_battRisk",
                prob(c.until(&all, &self.mark(|s| s[1] < p.batt_threshold))),
            ),
            (
                "P_timeBound",
                Answer::Prob(c.bounded_eventually(&at(4), 5)[s0].clone()),
            ),
            (
                "P_safeEnergy",
                one_minus(c.until(
                    &all,
                    &self.mark(|s| !(s[0] != 5 && s[0] != 6 && s[1] >= p.batt_threshold)),
                )),
            ),
            ("R_dose", reward(&|s| (s[2] >= 1) as i64)),
            ("R_moves", reward(&|s| (s[0] < 4) as i64)),
            ("R_time_cm", reward(&|s| (s[3] == 1) as i64)),
            ("R_time_stopped", reward(&|s| (s[4] == 0) as i64)),
            ("P_warnMode", p_ge1_f(self.mark(|s| s[2] == 1 && s[3] == 1))),
            ("P_critMode", p_ge1_f(self.mark(|s| s[2] == 2 && s[3] == 2))),
            (
                "P_fullSpeed",
                p_ge1_g(self.mark(|s| s[3] != 0 || s[4] == 2)),
            ),
            (
                "P_slowSpeed",
                p_ge1_g(self.mark(|s| s[3] != 1 || s[4] == 1)),
            ),
            ("P_stopped", p_ge1_g(self.mark(|s| s[3] != 2 || s[4] == 0))),
            (
                "P_noOpOutside",
                p_le0_f(self.mark(|s| s[3] != 0 && s[5] == 1)),
            ),
        ]
    }
}
