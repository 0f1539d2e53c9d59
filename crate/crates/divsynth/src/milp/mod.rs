//! Mixed-integer linear programming: model construction, a bounded-variable
//! simplex for the relaxations, branch and bound over the binaries, and a
//! textual export of models.
//!
//! Conventions: every problem is a maximization; constraints are linear with
//! `<=`, `>=`, or `=` sense; variables are continuous or binary and carry
//! explicit bounds. Binaries may be fixed through their bounds.

pub mod branch_bound;
pub mod lp_format;
pub mod simplex;
#[cfg(test)]
pub(crate) mod test_oracle;

use std::time::Duration;

use thiserror::Error;

pub use branch_bound::solve;

pub type VarId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable `{name}`: bad bounds [{lo}, {hi}]")]
    BadBounds { name: String, lo: f64, hi: f64 },
    #[error("variable `{name}`: binary bounds must lie within [0, 1] (got [{lo}, {hi}])")]
    BadBinaryBounds { name: String, lo: f64, hi: f64 },
    #[error("constraint `{name}` references unknown variable {id}")]
    UnknownVar { name: String, id: VarId },
    #[error("constraint `{name}` has a non-finite coefficient or right-hand side")]
    NonFinite { name: String },
    #[error("fixing variable `{name}` to {value} violates its bounds [{lo}, {hi}]")]
    FixOutOfBounds {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct MilpVar {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl std::fmt::Display for Sense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
            Sense::Eq => write!(f, "="),
        }
    }
}

/// `terms . x  sense  rhs`, with terms sorted by variable id and merged.
#[derive(Debug, Clone)]
pub struct LinConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    vars: Vec<MilpVar>,
    constraints: Vec<LinConstraint>,
    /// Dense objective coefficients, maximization.
    objective: Vec<f64>,
    /// Constant added to the reported objective value.
    objective_offset: f64,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lo: f64,
        hi: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        {
            return Err(ModelError::BadBounds { name, lo, hi });
        }
        if kind == VarKind::Binary && (lo < 0.0 || hi > 1.0) {
            return Err(ModelError::BadBinaryBounds { name, lo, hi });
        }
        self.vars.push(MilpVar { name, kind, lo, hi });
        self.objective.push(0.0);
        Ok(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
            .expect("binary bounds are valid")
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lo: f64,
        hi: f64,
    ) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Continuous, lo, hi)
    }

    /// Adds a constraint; duplicate variable mentions are merged. Returns the
    /// row index.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        if !rhs.is_finite() || terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(ModelError::NonFinite { name });
        }
        if let Some(&(id, _)) = terms.iter().find(|(id, _)| *id >= self.vars.len()) {
            return Err(ModelError::UnknownVar { name, id });
        }
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        let mut sorted = terms;
        sorted.sort_by_key(|(id, _)| *id);
        for (id, c) in sorted {
            match merged.last_mut() {
                Some((last, acc)) if *last == id => *acc += c,
                _ => merged.push((id, c)),
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        self.constraints.push(LinConstraint {
            name,
            terms: merged,
            sense,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    /// Replaces the objective with the given terms (maximization).
    pub fn set_objective(&mut self, terms: &[(VarId, f64)]) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(id, c) in terms {
            self.objective[id] += c;
        }
    }

    pub fn set_objective_coeff(&mut self, id: VarId, c: f64) {
        self.objective[id] = c;
    }

    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn vars(&self) -> &[MilpVar] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &MilpVar {
        &self.vars[id]
    }

    pub fn constraints(&self) -> &[LinConstraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Pins a variable to `value` by collapsing its bounds.
    pub fn fix_var(&mut self, id: VarId, value: f64) -> Result<(), ModelError> {
        let v = &mut self.vars[id];
        let tol = 1e-9 * (1.0 + value.abs());
        if value < v.lo - tol || value > v.hi + tol {
            return Err(ModelError::FixOutOfBounds {
                name: v.name.clone(),
                value,
                lo: v.lo,
                hi: v.hi,
            });
        }
        let value = value.clamp(v.lo, v.hi);
        v.lo = value;
        v.hi = value;
        Ok(())
    }

    /// Adds `z = |terms . x + offset|` exactly, using one fresh binary to
    /// select the active side. The big constant is derived from the declared
    /// bounds of the participating variables. Returns `z`.
    pub fn linearize_abs(
        &mut self,
        name_prefix: &str,
        terms: &[(VarId, f64)],
        offset: f64,
    ) -> Result<VarId, ModelError> {
        let mut reach = offset.abs();
        for &(id, c) in terms {
            if id >= self.vars.len() {
                return Err(ModelError::UnknownVar {
                    name: format!("{name_prefix}_abs"),
                    id,
                });
            }
            let v = &self.vars[id];
            reach += c.abs() * v.lo.abs().max(v.hi.abs());
        }
        if !reach.is_finite() {
            return Err(ModelError::NonFinite {
                name: format!("{name_prefix}_abs"),
            });
        }
        // `big` must dominate |y| everywhere; slack guards roundoff.
        let big = reach + 1.0;
        let z = self.add_continuous(format!("{name_prefix}_abs"), 0.0, big)?;
        let s = self.add_binary(format!("{name_prefix}_sign"));

        let with_z = |zc: f64, sc: f64, sign: f64| -> Vec<(VarId, f64)> {
            let mut t: Vec<(VarId, f64)> = vec![(z, zc)];
            if sc != 0.0 {
                t.push((s, sc));
            }
            t.extend(terms.iter().map(|&(id, c)| (id, sign * c)));
            t
        };
        // z >= y and z >= -y.
        self.add_constraint(
            format!("{name_prefix}_abs_ge_pos"),
            with_z(1.0, 0.0, -1.0),
            Sense::Ge,
            offset,
        )?;
        self.add_constraint(
            format!("{name_prefix}_abs_ge_neg"),
            with_z(1.0, 0.0, 1.0),
            Sense::Ge,
            -offset,
        )?;
        // z <= y + 2 big (1 - s) and z <= -y + 2 big s.
        self.add_constraint(
            format!("{name_prefix}_abs_le_pos"),
            with_z(1.0, 2.0 * big, -1.0),
            Sense::Le,
            2.0 * big + offset,
        )?;
        self.add_constraint(
            format!("{name_prefix}_abs_le_neg"),
            with_z(1.0, -2.0 * big, 1.0),
            Sense::Le,
            -offset,
        )?;
        Ok(z)
    }

    /// Objective value of an assignment, offset included.
    pub fn eval_objective(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.objective_offset
    }

    /// Checks an assignment against bounds, integrality, and all rows.
    /// Returns one message per violation; empty means the assignment is
    /// feasible within `tol`.
    pub fn check_solution(&self, x: &[f64], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if x.len() != self.vars.len() {
            out.push(format!(
                "assignment has {} values for {} variables",
                x.len(),
                self.vars.len()
            ));
            return out;
        }
        for (i, v) in self.vars.iter().enumerate() {
            if x[i] < v.lo - tol || x[i] > v.hi + tol {
                out.push(format!(
                    "variable `{}` = {} outside [{}, {}]",
                    v.name, x[i], v.lo, v.hi
                ));
            }
            if v.kind == VarKind::Binary && (x[i] - x[i].round()).abs() > tol {
                out.push(format!("binary `{}` = {} is fractional", v.name, x[i]));
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(id, coef)| coef * x[id]).sum();
            let ok = match c.sense {
                Sense::Le => lhs <= c.rhs + tol,
                Sense::Ge => lhs >= c.rhs - tol,
                Sense::Eq => (lhs - c.rhs).abs() <= tol,
            };
            if !ok {
                out.push(format!(
                    "constraint `{}`: {} {} {} violated",
                    c.name, lhs, c.sense, c.rhs
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub time_limit: Option<Duration>,
    /// Stop exploring nodes after this many (testing aid).
    pub node_limit: Option<usize>,
    pub feas_tol: f64,
    pub int_tol: f64,
    /// Absolute optimality gap for pruning.
    pub gap_tol: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            time_limit: None,
            node_limit: None,
            feas_tol: 1e-6,
            int_tol: 1e-6,
            gap_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// Best incumbent proven optimal within the gap tolerance.
    Optimal,
    /// An incumbent exists but the search stopped early.
    Feasible,
    Infeasible,
    Unbounded,
    /// The search stopped early with no incumbent at all.
    Timeout,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Optimal => write!(f, "optimal"),
            Status::Feasible => write!(f, "feasible"),
            Status::Infeasible => write!(f, "infeasible"),
            Status::Unbounded => write!(f, "unbounded"),
            Status::Timeout => write!(f, "timeout"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    /// Assignment per variable id; present for Optimal and Feasible.
    pub values: Option<Vec<f64>>,
    /// Objective of the incumbent, offset included; NAN when absent.
    pub objective: f64,
    /// Final proof bound on the objective (offset included).
    pub best_bound: f64,
    pub nodes: usize,
    /// Objective of each successive incumbent, in discovery order.
    pub incumbent_history: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_var_validates_bounds() {
        let mut m = MilpModel::new();
        assert!(m.add_var("x", VarKind::Continuous, 1.0, -1.0).is_err());
        assert!(m.add_var("x", VarKind::Continuous, f64::NAN, 1.0).is_err());
        assert!(m.add_var("b", VarKind::Binary, 0.0, 2.0).is_err());
        assert!(m.add_var("x", VarKind::Continuous, 0.0, f64::INFINITY).is_ok());
        assert!(m.add_var("y", VarKind::Continuous, f64::NEG_INFINITY, 0.0).is_ok());
    }

    #[test]
    fn constraints_merge_duplicate_terms() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let y = m.add_continuous("y", 0.0, 1.0).unwrap();
        m.add_constraint("r", vec![(y, 2.0), (x, 1.0), (y, 3.0), (x, -1.0)], Sense::Le, 4.0)
            .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(y, 5.0)]);
    }

    #[test]
    fn constraint_rejects_unknown_var_and_nonfinite() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        assert!(m.add_constraint("r", vec![(7, 1.0)], Sense::Le, 0.0).is_err());
        assert!(m
            .add_constraint("r", vec![(x, f64::INFINITY)], Sense::Le, 0.0)
            .is_err());
        assert!(m.add_constraint("r", vec![(x, 1.0)], Sense::Le, f64::NAN).is_err());
    }

    #[test]
    fn fix_var_respects_original_bounds() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 5.0).unwrap();
        assert!(m.fix_var(x, 6.0).is_err());
        m.fix_var(x, 2.5).unwrap();
        assert_eq!((m.var(x).lo, m.var(x).hi), (2.5, 2.5));
    }

    #[test]
    fn linearize_abs_adds_selector_and_four_rows() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", -3.0, 7.0).unwrap();
        let rows_before = m.num_constraints();
        let z = m.linearize_abs("d", &[(x, 2.0)], -1.0).unwrap();
        assert_eq!(m.num_constraints(), rows_before + 4);
        assert_eq!(m.num_binaries(), 1);
        // |2x - 1| over [-3, 7] reaches 14; bound must cover it with slack.
        assert!(m.var(z).hi >= 14.0);
        assert_eq!(m.var(z).lo, 0.0);
    }

    #[test]
    fn check_solution_reports_violations() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let b = m.add_binary("b");
        m.add_constraint("r", vec![(x, 1.0), (b, 1.0)], Sense::Le, 1.0)
            .unwrap();
        assert!(m.check_solution(&[0.5, 0.0], 1e-9).is_empty());
        assert_eq!(m.check_solution(&[2.0, 0.0], 1e-9).len(), 2); // bound + row
        assert_eq!(m.check_solution(&[0.2, 0.5], 1e-9).len(), 1); // fractional
    }

    #[test]
    fn objective_includes_offset() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        m.set_objective(&[(x, 2.0)]);
        m.set_objective_offset(10.0);
        assert_eq!(m.eval_objective(&[0.5]), 11.0);
    }
}
