//! Trace monitoring: boolean and robust satisfaction of a formula by a
//! piecewise-linear signal.
//!
//! Time quantifiers are decided on a finite grid: multiples of the requested
//! step from the evaluation time, every partition point of the signal, every
//! temporal window endpoint shifted by the evaluation time, and the exact
//! zero-crossing times of every atom. Atoms are affine along each partition
//! cell, so including their crossings decides them exactly; only nested
//! suprema/infima remain grid approximations. Times past the horizon behave
//! like the horizon itself because the signal extends constantly.

use std::fmt;

use thiserror::Error;

use super::formula::{Formula, Interval};
use super::subformulas::SubformulaTable;
use crate::pwl::TimedStateSequence;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("evaluation time {t} outside the trace horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("step must be positive (got {0})")]
    BadStep(f64),
    #[error("formula references variable `{0}` absent from the trace")]
    UnknownVariable(String),
}

/// Robustness value: a real degree of satisfaction with explicit infinities
/// for the constants. Arithmetic never mixes infinities with finite values;
/// only min/max and negation are defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Robustness {
    NegInf,
    Value(f64),
    PosInf,
}

impl Robustness {
    pub fn min(self, other: Robustness) -> Robustness {
        match (self, other) {
            (Robustness::NegInf, _) | (_, Robustness::NegInf) => Robustness::NegInf,
            (Robustness::PosInf, x) | (x, Robustness::PosInf) => x,
            (Robustness::Value(a), Robustness::Value(b)) => Robustness::Value(a.min(b)),
        }
    }

    pub fn max(self, other: Robustness) -> Robustness {
        match (self, other) {
            (Robustness::PosInf, _) | (_, Robustness::PosInf) => Robustness::PosInf,
            (Robustness::NegInf, x) | (x, Robustness::NegInf) => x,
            (Robustness::Value(a), Robustness::Value(b)) => Robustness::Value(a.max(b)),
        }
    }

    pub fn negated(self) -> Robustness {
        match self {
            Robustness::NegInf => Robustness::PosInf,
            Robustness::PosInf => Robustness::NegInf,
            Robustness::Value(v) => Robustness::Value(-v),
        }
    }

    pub fn is_positive(self) -> bool {
        match self {
            Robustness::PosInf => true,
            Robustness::Value(v) => v > 0.0,
            Robustness::NegInf => false,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Robustness::NegInf => true,
            Robustness::Value(v) => v < 0.0,
            Robustness::PosInf => false,
        }
    }
}

impl fmt::Display for Robustness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Robustness::NegInf => write!(f, "-inf"),
            Robustness::PosInf => write!(f, "+inf"),
            Robustness::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Boolean satisfaction of `formula` by the postfix of `signal` at time `t`.
pub fn eval_boolean(
    signal: &TimedStateSequence,
    formula: &Formula,
    t: f64,
    step: f64,
) -> Result<bool, MonitorError> {
    let eval = Evaluation::prepare(signal, formula, t, step)?;
    Ok(eval.boolean_root())
}

/// Robust satisfaction of `formula` by the postfix of `signal` at time `t`.
pub fn eval_robust(
    signal: &TimedStateSequence,
    formula: &Formula,
    t: f64,
    step: f64,
) -> Result<Robustness, MonitorError> {
    let eval = Evaluation::prepare(signal, formula, t, step)?;
    Ok(eval.robust_root())
}

/// Atom with variable names resolved to state indices.
struct ResolvedAtom {
    terms: Vec<(usize, f64)>,
    offset: f64,
}

impl ResolvedAtom {
    fn resolve(
        atom: &super::formula::AffineAtom,
        signal: &TimedStateSequence,
    ) -> Result<Self, MonitorError> {
        let terms = atom
            .terms()
            .iter()
            .map(|(v, c)| {
                signal
                    .var_index(v)
                    .map(|i| (i, *c))
                    .map_err(|_| MonitorError::UnknownVariable(v.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ResolvedAtom {
            terms,
            offset: atom.offset(),
        })
    }

    fn value(&self, state: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(i, c)| c * state[*i])
            .sum::<f64>()
            + self.offset
    }
}

struct Evaluation {
    #[cfg_attr(not(test), allow(dead_code))]
    grid: Vec<f64>,
    table: SubformulaTable,
    /// Boolean truth per (table entry, grid point).
    truth: Vec<Vec<bool>>,
    robust: Vec<Vec<Robustness>>,
    root_constant: Option<bool>,
}

const EPS: f64 = 1e-9;

impl Evaluation {
    fn prepare(
        signal: &TimedStateSequence,
        formula: &Formula,
        t: f64,
        step: f64,
    ) -> Result<Self, MonitorError> {
        let horizon = signal.horizon();
        if !(step > 0.0) {
            return Err(MonitorError::BadStep(step));
        }
        if !(0.0..=horizon + EPS).contains(&t) {
            return Err(MonitorError::TimeOutOfRange { t, horizon });
        }
        let t = t.min(horizon);

        let table = SubformulaTable::build(formula);
        let root_constant = match formula {
            Formula::True => Some(true),
            Formula::False => Some(false),
            _ => None,
        };

        // Resolve atoms once; order matches table order for atom entries.
        let mut resolved: Vec<Option<ResolvedAtom>> = Vec::with_capacity(table.len());
        for entry in table.iter() {
            resolved.push(match entry {
                Formula::Atom(a) | Formula::NegAtom(a) => {
                    Some(ResolvedAtom::resolve(a, signal)?)
                }
                _ => None,
            });
        }

        let grid = build_grid(signal, formula, &table, &resolved, t, step);
        let states: Vec<Vec<f64>> = grid
            .iter()
            .map(|&g| signal.value_at(g).expect("grid within horizon"))
            .collect();

        let n = grid.len();
        let mut truth: Vec<Vec<bool>> = Vec::with_capacity(table.len());
        let mut robust: Vec<Vec<Robustness>> = Vec::with_capacity(table.len());

        for (idx, entry) in table.iter().enumerate() {
            let (tv, rv) = match entry {
                Formula::True | Formula::False => unreachable!("constants not in table"),
                Formula::Atom(_) => {
                    let ra = resolved[idx].as_ref().unwrap();
                    let vals: Vec<f64> = states.iter().map(|s| ra.value(s)).collect();
                    (
                        vals.iter().map(|&v| v >= 0.0).collect(),
                        vals.iter().map(|&v| Robustness::Value(v)).collect(),
                    )
                }
                Formula::NegAtom(_) => {
                    let ra = resolved[idx].as_ref().unwrap();
                    let vals: Vec<f64> = states.iter().map(|s| ra.value(s)).collect();
                    (
                        vals.iter().map(|&v| v < 0.0).collect(),
                        vals.iter().map(|&v| Robustness::Value(-v)).collect(),
                    )
                }
                Formula::And(children) => {
                    let mut tv = vec![true; n];
                    let mut rv = vec![Robustness::PosInf; n];
                    for c in children {
                        merge_child(&table, &truth, &robust, c, |ct, cr, k| {
                            tv[k] = tv[k] && ct;
                            rv[k] = rv[k].min(cr);
                        });
                    }
                    (tv, rv)
                }
                Formula::Or(children) => {
                    let mut tv = vec![false; n];
                    let mut rv = vec![Robustness::NegInf; n];
                    for c in children {
                        merge_child(&table, &truth, &robust, c, |ct, cr, k| {
                            tv[k] = tv[k] || ct;
                            rv[k] = rv[k].max(cr);
                        });
                    }
                    (tv, rv)
                }
                Formula::Until(i, lhs, rhs) => temporal(
                    &grid, horizon, *i, &table, &truth, &robust, lhs, rhs, true,
                ),
                Formula::Release(i, lhs, rhs) => temporal(
                    &grid, horizon, *i, &table, &truth, &robust, lhs, rhs, false,
                ),
            };
            truth.push(tv);
            robust.push(rv);
        }

        Ok(Evaluation {
            grid,
            table,
            truth,
            robust,
            root_constant,
        })
    }

    fn boolean_root(&self) -> bool {
        match self.root_constant {
            Some(b) => b,
            None => self.truth[self.table.root_index()][0],
        }
    }

    fn robust_root(&self) -> Robustness {
        match self.root_constant {
            Some(true) => Robustness::PosInf,
            Some(false) => Robustness::NegInf,
            None => self.robust[self.table.root_index()][0],
        }
    }

    #[cfg(test)]
    fn grid_len(&self) -> usize {
        self.grid.len()
    }
}

/// Applies `f(child_truth, child_robustness, grid_index)` for every grid
/// index, treating the constants as all-true/all-false rows.
fn merge_child<F: FnMut(bool, Robustness, usize)>(
    table: &SubformulaTable,
    truth: &[Vec<bool>],
    robust: &[Vec<Robustness>],
    child: &Formula,
    mut f: F,
) {
    match child {
        Formula::True => {
            let n = truth.first().map_or(0, |v| v.len());
            for k in 0..n {
                f(true, Robustness::PosInf, k);
            }
        }
        Formula::False => {
            let n = truth.first().map_or(0, |v| v.len());
            for k in 0..n {
                f(false, Robustness::NegInf, k);
            }
        }
        _ => {
            let idx = table.index_of(child).expect("child precedes parent");
            for k in 0..truth[idx].len() {
                f(truth[idx][k], robust[idx][k], k);
            }
        }
    }
}

fn child_rows<'a>(
    table: &SubformulaTable,
    truth: &'a [Vec<bool>],
    robust: &'a [Vec<Robustness>],
    child: &Formula,
    n: usize,
) -> (Vec<bool>, Vec<Robustness>) {
    match child {
        Formula::True => (vec![true; n], vec![Robustness::PosInf; n]),
        Formula::False => (vec![false; n], vec![Robustness::NegInf; n]),
        _ => {
            let idx = table.index_of(child).expect("child precedes parent");
            (truth[idx].clone(), robust[idx].clone())
        }
    }
}

/// Shared evaluation of until (`existential = true`) and release over the
/// grid. For evaluation point i with window [lo, hi], the candidate witness
/// set is every grid point within the window clipped to the horizon; if the
/// window starts past the horizon it is the final point alone, since the
/// signal (and hence every truth value) is constant from the horizon on.
#[allow(clippy::too_many_arguments)]
fn temporal(
    grid: &[f64],
    horizon: f64,
    window: Interval,
    table: &SubformulaTable,
    truth: &[Vec<bool>],
    robust: &[Vec<Robustness>],
    lhs: &Formula,
    rhs: &Formula,
    existential: bool,
) -> (Vec<bool>, Vec<Robustness>) {
    let n = grid.len();
    let (lt, lr) = child_rows(table, truth, robust, lhs, n);
    let (rt, rr) = child_rows(table, truth, robust, rhs, n);
    let mut tv = vec![false; n];
    let mut rv = vec![Robustness::NegInf; n];
    let last = n - 1;

    for i in 0..n {
        let ti = grid[i];
        let start_past_horizon = ti + window.lo() > horizon + EPS;
        let upper = if window.is_unbounded() {
            horizon
        } else {
            (ti + window.hi()).min(horizon)
        };

        let mut running_and = true;
        let mut running_min = Robustness::PosInf;
        let mut running_or = false;
        let mut running_max = Robustness::NegInf;
        let mut bool_acc = !existential;
        let mut rob_acc = if existential {
            Robustness::NegInf
        } else {
            Robustness::PosInf
        };

        for j in i..n {
            let tj = grid[j];
            if existential {
                running_and = running_and && lt[j];
                running_min = running_min.min(lr[j]);
            } else {
                running_or = running_or || lt[j];
                running_max = running_max.max(lr[j]);
            }
            let qualifies = if start_past_horizon {
                j == last
            } else {
                tj >= ti + window.lo() - EPS && tj <= upper + EPS
            };
            if qualifies {
                if existential {
                    bool_acc = bool_acc || (rt[j] && running_and);
                    rob_acc = rob_acc.max(rr[j].min(running_min));
                } else {
                    bool_acc = bool_acc && (rt[j] || running_or);
                    rob_acc = rob_acc.min(rr[j].max(running_max));
                }
            }
            if !start_past_horizon && tj > upper + EPS {
                break;
            }
        }
        tv[i] = bool_acc;
        rv[i] = rob_acc;
    }
    (tv, rv)
}

/// Evaluation grid: step multiples from `t`, partition points, window
/// endpoints shifted by `t`, atom zero-crossings, and the horizon.
fn build_grid(
    signal: &TimedStateSequence,
    formula: &Formula,
    table: &SubformulaTable,
    resolved: &[Option<ResolvedAtom>],
    t: f64,
    step: f64,
) -> Vec<f64> {
    let horizon = signal.horizon();
    let mut points = Vec::new();
    let mut k = 0u64;
    loop {
        let p = t + k as f64 * step;
        if p > horizon + EPS {
            break;
        }
        points.push(p.min(horizon));
        k += 1;
    }
    for &g in signal.times().points() {
        if g >= t - EPS {
            points.push(g.max(t));
        }
    }
    let mut endpoints = Vec::new();
    collect_window_endpoints(formula, &mut endpoints);
    for e in endpoints {
        let p = t + e;
        if p <= horizon + EPS {
            points.push(p.min(horizon));
        }
    }
    // Zero crossings of every atom, cell by cell.
    for (idx, entry) in table.iter().enumerate() {
        if !matches!(entry, Formula::Atom(_) | Formula::NegAtom(_)) {
            continue;
        }
        let ra = resolved[idx].as_ref().unwrap();
        let pts = signal.times().points();
        let states = signal.states();
        for c in 1..pts.len() {
            let (v0, v1) = (ra.value(&states[c - 1]), ra.value(&states[c]));
            if (v0 < 0.0 && v1 > 0.0) || (v0 > 0.0 && v1 < 0.0) {
                let cross = pts[c - 1] + (pts[c] - pts[c - 1]) * (-v0) / (v1 - v0);
                if cross >= t - EPS && cross <= horizon + EPS {
                    points.push(cross.clamp(t, horizon));
                }
            }
        }
    }
    points.push(horizon);
    points.push(t);
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup_by(|a, b| (*a - *b).abs() <= EPS);
    points
}

fn collect_window_endpoints(formula: &Formula, out: &mut Vec<f64>) {
    match formula {
        Formula::True | Formula::False | Formula::Atom(_) | Formula::NegAtom(_) => {}
        Formula::And(children) | Formula::Or(children) => {
            for c in children {
                collect_window_endpoints(c, out);
            }
        }
        Formula::Until(i, lhs, rhs) | Formula::Release(i, lhs, rhs) => {
            out.push(i.lo());
            if !i.is_unbounded() {
                out.push(i.hi());
            }
            collect_window_endpoints(lhs, out);
            collect_window_endpoints(rhs, out);
        }
    }
}
