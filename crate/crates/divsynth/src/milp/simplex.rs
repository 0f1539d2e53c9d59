//! Bounded-variable primal simplex over a dense tableau.
//!
//! The tableau keeps `B^{-1}A` for the full column set (structural variables
//! followed by one slack per row) plus `B^{-1}b`, so variable bounds can be
//! changed freely between solves without invalidating the factorization.
//! Branch and bound exploits that: fixing a binary only moves bounds, so each
//! node resumes from the previous basis and typically needs few pivots.
//!
//! Phase 1 runs a composite method minimizing the total bound violation of
//! the basic variables, stopping at the first kink of the piecewise-linear
//! infeasibility along each direction. Phase 2 is Dantzig pricing with a
//! switch to Bland's rule after a run of degenerate steps.
//!
//! Dense rank-1 updates accumulate error, so three safeguards keep long warm
//! runs honest: the ratio test is two-pass (bounds relaxed by the feasibility
//! tolerance, then the largest pivot element among the blocking candidates is
//! chosen), the pristine rows are kept and the tableau is rebuilt from them
//! periodically, and a phase-1 stall only reports infeasible after an
//! aggregation certificate built from the pristine rows confirms it; anything
//! unconfirmed triggers one rebuild-and-retry before giving up.

use super::{MilpModel, Sense};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Safety valve: the pivot cap was hit before termination.
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Structural variable values; meaningful only for `Optimal`.
    pub values: Vec<f64>,
    /// Objective including the model offset; meaningful only for `Optimal`.
    pub objective: f64,
}

const FEAS_TOL: f64 = 1e-7;
const RC_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGEN_STEP: f64 = 1e-10;
const DEGEN_LIMIT: usize = 50;
const RC_REFRESH_PERIOD: usize = 256;

enum Block {
    /// The entering variable reaches its own opposite bound.
    OwnBound,
    /// A basic variable reaches a bound and leaves the basis.
    Basic { row: usize, at_upper: bool },
}

pub struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    /// `B^{-1} A`, row major.
    rows: Vec<Vec<f64>>,
    /// `B^{-1} b`.
    beta: Vec<f64>,
    /// Row index -> basic column.
    basic: Vec<usize>,
    /// Column -> row index when basic.
    row_of: Vec<Option<usize>>,
    /// Nonbasic position flag (meaningful when not basic).
    at_upper: Vec<bool>,
    /// Row index -> value of its basic variable.
    xb: Vec<f64>,
    /// Reduced costs, maintained across pivots.
    rc: Vec<f64>,
    /// Objective coefficient per column (zero for slacks).
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    offset: f64,
    iterations: usize,
    max_iterations: usize,
    degen_streak: usize,
    bland: bool,
    pivots_since_refresh: usize,
}

impl Tableau {
    pub fn new(model: &MilpModel) -> Tableau {
        let m = model.num_constraints();
        let n = model.num_vars();
        let ncols = n + m;
        let mut rows = vec![vec![0.0; ncols]; m];
        let mut lo = vec![0.0; ncols];
        let mut hi = vec![0.0; ncols];
        let mut cost = vec![0.0; ncols];
        for (j, v) in model.vars().iter().enumerate() {
            lo[j] = v.lo;
            hi[j] = v.hi;
            cost[j] = model.objective()[j];
        }
        let mut beta = vec![0.0; m];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(id, coef) in &c.terms {
                rows[i][id] = coef;
            }
            rows[i][n + i] = 1.0;
            beta[i] = c.rhs;
            // Row: terms . x + s = rhs, with the slack sign encoding the sense.
            let (slo, shi) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo[n + i] = slo;
            hi[n + i] = shi;
        }
        let basic: Vec<usize> = (0..m).map(|i| n + i).collect();
        let mut row_of = vec![None; ncols];
        for (i, &b) in basic.iter().enumerate() {
            row_of[b] = Some(i);
        }
        let at_upper = (0..ncols)
            .map(|j| !lo[j].is_finite() && hi[j].is_finite())
            .collect();
        let max_iterations = 50_000 + 20 * (m + ncols);
        Tableau {
            m,
            n,
            ncols,
            rows,
            beta,
            basic,
            row_of,
            at_upper,
            xb: vec![0.0; m],
            rc: vec![0.0; ncols],
            cost,
            lo,
            hi,
            offset: model.objective_offset(),
            iterations: 0,
            max_iterations,
            degen_streak: 0,
            bland: false,
        pivots_since_refresh: 0,
        }
    }

    /// Solves with the given structural bounds, warm-starting from whatever
    /// basis the previous call left behind.
    pub fn solve_with_bounds(&mut self, lo_s: &[f64], hi_s: &[f64]) -> LpResult {
        assert_eq!(lo_s.len(), self.n);
        assert_eq!(hi_s.len(), self.n);
        self.lo[..self.n].copy_from_slice(lo_s);
        self.hi[..self.n].copy_from_slice(hi_s);
        for j in 0..self.ncols {
            if self.row_of[j].is_none() {
                self.normalize_position(j);
            }
        }
        self.recompute_basic_values();
        self.iterations = 0;
        self.degen_streak = 0;
        self.bland = false;

        if !self.phase1() {
            return LpResult {
                status: if self.iterations >= self.max_iterations {
                    LpStatus::IterationLimit
                } else {
                    LpStatus::Infeasible
                },
                values: Vec::new(),
                objective: f64::NAN,
            };
        }
        let status = self.phase2();
        let values = self.structural_values();
        let objective = match status {
            LpStatus::Optimal => {
                values
                    .iter()
                    .zip(&self.cost)
                    .map(|(x, c)| x * c)
                    .sum::<f64>()
                    + self.offset
            }
            _ => f64::NAN,
        };
        LpResult {
            status,
            values,
            objective,
        }
    }

    pub fn structural_values(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| match self.row_of[j] {
                Some(r) => self.xb[r],
                None => self.nonbasic_value(j),
            })
            .collect()
    }

    /// Keeps the position flag pointing at a finite bound where possible.
    fn normalize_position(&mut self, j: usize) {
        if self.at_upper[j] && !self.hi[j].is_finite() {
            self.at_upper[j] = false;
        }
        if !self.at_upper[j] && !self.lo[j].is_finite() && self.hi[j].is_finite() {
            self.at_upper[j] = true;
        }
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.hi[j]
        } else if self.lo[j].is_finite() {
            self.lo[j]
        } else {
            // Free variable rests at zero.
            0.0
        }
    }

    fn recompute_basic_values(&mut self) {
        self.xb.copy_from_slice(&self.beta);
        for j in 0..self.ncols {
            if self.row_of[j].is_some() {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for i in 0..self.m {
                    self.xb[i] -= self.rows[i][j] * v;
                }
            }
        }
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.hi[j] - self.lo[j] <= 1e-12
    }

    /// Entering column given a score vector where moving in direction `d`
    /// improves iff `d * score[j] > 0`. Returns (column, direction).
    fn entering(&self, score: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.row_of[j].is_some() || self.is_fixed(j) {
                continue;
            }
            let free = !self.lo[j].is_finite() && !self.hi[j].is_finite();
            let d = if free {
                if score[j] > RC_TOL {
                    1.0
                } else if score[j] < -RC_TOL {
                    -1.0
                } else {
                    continue;
                }
            } else if self.at_upper[j] {
                if score[j] < -RC_TOL {
                    -1.0
                } else {
                    continue;
                }
            } else if score[j] > RC_TOL {
                1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, d));
            }
            let mag = score[j].abs();
            if best.map_or(true, |(_, _, m)| mag > m) {
                best = Some((j, d, mag));
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// Maximum step `t >= 0` for entering column `j` in direction `d`.
    /// `phase1` adds the kinks where violated basic variables regain their
    /// bounds. Returns None when the direction is unblocked.
    fn ratio_test(&self, j: usize, d: f64, phase1: bool) -> Option<(f64, Block)> {
        let mut best_t = if self.lo[j].is_finite() && self.hi[j].is_finite() {
            self.hi[j] - self.lo[j]
        } else {
            f64::INFINITY
        };
        let mut block = Block::OwnBound;
        for i in 0..self.m {
            let a = self.rows[i][j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rate = -d * a; // movement of basic i per unit step
            let bi = self.basic[i];
            let x = self.xb[i];
            let (blo, bhi) = (self.lo[bi], self.hi[bi]);
            let event: Option<(f64, bool)> = if phase1 && x < blo - FEAS_TOL {
                // Violated below: the kink where it regains its lower bound.
                (rate > 0.0).then(|| ((blo - x) / rate, false))
            } else if phase1 && x > bhi + FEAS_TOL {
                (rate < 0.0).then(|| ((x - bhi) / -rate, true))
            } else if rate < 0.0 && blo.is_finite() {
                Some(((x - blo) / -rate, false))
            } else if rate > 0.0 && bhi.is_finite() {
                Some(((bhi - x) / rate, true))
            } else {
                None
            };
            if let Some((t, at_upper)) = event {
                let t = t.max(0.0);
                if t < best_t {
                    best_t = t;
                    block = Block::Basic { row: i, at_upper };
                }
            }
        }
        best_t.is_finite().then_some((best_t, block))
    }

    fn apply_step(&mut self, j: usize, d: f64, t: f64, block: Block) {
        self.iterations += 1;
        if t <= DEGEN_STEP {
            self.degen_streak += 1;
            if self.degen_streak >= DEGEN_LIMIT {
                self.bland = true;
            }
        } else {
            self.degen_streak = 0;
            self.bland = false;
        }
        let delta = d * t;
        match block {
            Block::OwnBound => {
                if delta != 0.0 {
                    for i in 0..self.m {
                        self.xb[i] -= self.rows[i][j] * delta;
                    }
                }
                self.at_upper[j] = !self.at_upper[j];
            }
            Block::Basic { row, at_upper } => {
                let entering_value = self.nonbasic_value(j) + delta;
                if delta != 0.0 {
                    for i in 0..self.m {
                        self.xb[i] -= self.rows[i][j] * delta;
                    }
                }
                let leaving = self.basic[row];
                self.row_of[leaving] = None;
                self.at_upper[leaving] = at_upper;
                self.basic[row] = j;
                self.row_of[j] = Some(row);
                self.xb[row] = entering_value;

                // Row operations keep B^{-1}A, B^{-1}b, and the reduced
                // costs consistent with the new basis.
                let piv = self.rows[row][j];
                debug_assert!(piv.abs() > PIVOT_TOL);
                let inv = 1.0 / piv;
                for v in self.rows[row].iter_mut() {
                    *v *= inv;
                }
                self.beta[row] *= inv;
                let (pivot_row, pivot_beta) = (self.rows[row].clone(), self.beta[row]);
                for i in 0..self.m {
                    if i == row {
                        continue;
                    }
                    let f = self.rows[i][j];
                    if f != 0.0 {
                        let dst = &mut self.rows[i];
                        for (dv, pv) in dst.iter_mut().zip(&pivot_row) {
                            *dv -= f * pv;
                        }
                        self.beta[i] -= f * pivot_beta;
                    }
                }
                let f = self.rc[j];
                if f != 0.0 {
                    for (rv, pv) in self.rc.iter_mut().zip(&pivot_row) {
                        *rv -= f * pv;
                    }
                }
                self.rc[j] = 0.0;
                self.pivots_since_refresh += 1;
            }
        }
    }

    /// Drives all basic variables inside their bounds. Returns feasibility.
    fn phase1(&mut self) -> bool {
        loop {
            if self.iterations >= self.max_iterations {
                return false;
            }
            let mut below: Vec<usize> = Vec::new();
            let mut above: Vec<usize> = Vec::new();
            for i in 0..self.m {
                let bi = self.basic[i];
                if self.xb[i] < self.lo[bi] - FEAS_TOL {
                    below.push(i);
                } else if self.xb[i] > self.hi[bi] + FEAS_TOL {
                    above.push(i);
                }
            }
            if below.is_empty() && above.is_empty() {
                return true;
            }
            // Score = negated derivative of the total violation: a basic
            // variable below its bound rises by -T[i][j] per unit of x_j, so
            // moving where d * score > 0 shrinks the violation.
            let mut score = vec![0.0; self.ncols];
            for &i in &below {
                for (s, v) in score.iter_mut().zip(&self.rows[i]) {
                    *s -= v;
                }
            }
            for &i in &above {
                for (s, v) in score.iter_mut().zip(&self.rows[i]) {
                    *s += v;
                }
            }
            for (j, s) in score.iter_mut().enumerate() {
                if self.row_of[j].is_some() {
                    *s = 0.0;
                }
            }
            let Some((j, d)) = self.entering(&score) else {
                return false; // no improving direction: infeasible
            };
            let Some((t, block)) = self.ratio_test(j, d, true) else {
                // A violation that decreases forever is impossible; treat a
                // missing block as numerical failure.
                return false;
            };
            self.apply_step(j, d, t, block);
        }
    }

    fn refresh_reduced_costs(&mut self) {
        self.rc.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basic[i]];
            if cb != 0.0 {
                for (rv, tv) in self.rc.iter_mut().zip(&self.rows[i]) {
                    *rv -= cb * tv;
                }
            }
        }
        for &b in &self.basic {
            self.rc[b] = 0.0;
        }
        self.pivots_since_refresh = 0;
    }

    fn phase2(&mut self) -> LpStatus {
        self.refresh_reduced_costs();
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.pivots_since_refresh >= RC_REFRESH_PERIOD {
                self.refresh_reduced_costs();
            }
            let Some((j, d)) = self.entering(&self.rc) else {
                return LpStatus::Optimal;
            };
            let Some((t, block)) = self.ratio_test(j, d, false) else {
                return LpStatus::Unbounded;
            };
            self.apply_step(j, d, t, block);
        }
    }
}

impl Tableau {
    /// Diagnostic: worst deviation of basic columns from unit vectors and of
    /// xb from a fresh recomputation.
    pub fn drift_report(&mut self) -> (f64, f64) {
        let mut unit_err: f64 = 0.0;
        for (r, &b) in self.basic.iter().enumerate() {
            for i in 0..self.m {
                let want = if i == r { 1.0 } else { 0.0 };
                unit_err = unit_err.max((self.rows[i][b] - want).abs());
            }
        }
        let saved = self.xb.clone();
        self.recompute_basic_values();
        let mut xb_err: f64 = 0.0;
        for (a, b) in saved.iter().zip(&self.xb) {
            xb_err = xb_err.max((a - b).abs());
        }
        (unit_err, xb_err)
    }
}

/// One-shot solve of the LP relaxation with the model's own bounds.
pub fn solve_relaxation(model: &MilpModel) -> LpResult {
    let lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
    let hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();
    Tableau::new(model).solve_with_bounds(&lo, &hi)
}
