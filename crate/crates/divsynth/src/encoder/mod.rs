//! Compilation of a formula and a system model into a mixed-integer linear
//! program whose feasible points decode to satisfying piecewise-linear
//! traces.
//!
//! Time is split into `cells` cells with searched boundaries: each cell
//! duration is a positive multiple of a fixed grid unit `g = horizon /
//! (cells * time_resolution)`, encoded in binary, so every product of a rate
//! with a duration linearizes exactly while the boundaries themselves remain
//! search variables. State variables take values at cell boundaries and are
//! linear in between; piecewise-constant inputs store the cell value at the
//! left boundary.
//!
//! Satisfaction uses one-sided cell certificates: per subformula and cell, a
//! binary that may be 1 only when the subformula holds throughout the whole
//! cell (with margin `delta` on atoms). Temporal operators quantify over
//! windows through witness and cover binaries tied to the boundary times.
//! The certificates are sound but not complete: a bit at 0 claims nothing.

pub mod schema;

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::milp::{MilpModel, ModelError, Sense, VarId, VarKind};
use crate::pwl::{PwlError, TimeSequence, TimedStateSequence};
use crate::stl::{Formula, Interval, SubformulaTable};

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("horizon must be positive and finite (got {0})")]
    BadHorizon(f64),
    #[error("cells must be at least 1")]
    BadCells,
    #[error("time resolution must be at least 1")]
    BadResolution,
    #[error("delta must be nonnegative and finite (got {0})")]
    BadDelta(f64),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("variable `{name}`: bounds [{lo}, {hi}] must be finite with lo < hi")]
    BadVarBounds { name: String, lo: f64, hi: f64 },
    #[error("variable `{name}`: initial range [{lo}, {hi}] must be a nonempty subset of its bounds")]
    BadInitRange { name: String, lo: f64, hi: f64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is driven by more than one dynamics block")]
    DoublyDriven(String),
    #[error("automaton needs at least one location")]
    NoLocations,
    #[error("automaton initial location index {0} is out of range")]
    BadInitialLocation(usize),
    #[error("automaton needs at least one initial location")]
    NoInitialLocations,
    #[error("location `{loc}`: {what} must list one pair per automaton variable")]
    BadLocationShape { loc: String, what: &'static str },
    #[error("location `{loc}`: empty interval in {what}")]
    EmptyLocationInterval { loc: String, what: &'static str },
    #[error("no initial location's invariant intersects the initial region")]
    UnreachableInitialRegion,
    #[error("decoded boundary times are not strictly increasing")]
    NonMonotoneBoundaries,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pwl(#[from] PwlError),
}

/// State or input variable of the system model.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct VarDef {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub init_lo: f64,
    pub init_hi: f64,
}

impl VarDef {
    /// Variable with its initial value unconstrained inside the bounds.
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        VarDef {
            name: name.into(),
            lo,
            hi,
            init_lo: lo,
            init_hi: hi,
        }
    }

    pub fn with_init(mut self, lo: f64, hi: f64) -> Self {
        self.init_lo = lo;
        self.init_hi = hi;
        self
    }
}

/// Rectangular automaton location: per automaton variable, a derivative
/// interval and an invariant box.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Location {
    pub name: String,
    pub flow: Vec<(f64, f64)>,
    pub invariant: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DynamicsBlock {
    /// `var` is constant on each cell and may jump at boundaries.
    PiecewiseConstantInput { var: String },
    /// d(state)/dt = rate, integrated per cell with the exact mean of the
    /// rate: the left value when the rate is a piecewise-constant input, the
    /// endpoint average otherwise.
    IntegratorLink { state: String, rate: String },
    /// Shorthand for pos<-vel and vel<-acc links.
    DoubleIntegrator { pos: String, vel: String, acc: String },
    /// Per cell, one active location constrains the change of every listed
    /// variable to its flow interval times the cell duration and keeps both
    /// cell endpoints inside its invariant box.
    RectangularAutomaton {
        vars: Vec<String>,
        locations: Vec<Location>,
        initial: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SystemModel {
    pub name: String,
    pub horizon: f64,
    pub vars: Vec<VarDef>,
    pub blocks: Vec<DynamicsBlock>,
}

impl SystemModel {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn var_names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    /// Blocks with the double-integrator shorthand expanded.
    fn normalized_blocks(&self) -> Vec<DynamicsBlock> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match b {
                DynamicsBlock::DoubleIntegrator { pos, vel, acc } => {
                    out.push(DynamicsBlock::IntegratorLink {
                        state: pos.clone(),
                        rate: vel.clone(),
                    });
                    out.push(DynamicsBlock::IntegratorLink {
                        state: vel.clone(),
                        rate: acc.clone(),
                    });
                }
                other => out.push(other.clone()),
            }
        }
        out
    }

    fn pwc_vars(&self) -> HashSet<String> {
        self.normalized_blocks()
            .iter()
            .filter_map(|b| match b {
                DynamicsBlock::PiecewiseConstantInput { var } => Some(var.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), EncodeError> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(EncodeError::BadHorizon(self.horizon));
        }
        let mut seen = HashSet::new();
        for v in &self.vars {
            if !seen.insert(v.name.clone()) {
                return Err(EncodeError::DuplicateVariable(v.name.clone()));
            }
            if !(v.lo.is_finite() && v.hi.is_finite() && v.lo < v.hi) {
                return Err(EncodeError::BadVarBounds {
                    name: v.name.clone(),
                    lo: v.lo,
                    hi: v.hi,
                });
            }
            if v.init_lo > v.init_hi || v.init_lo < v.lo - 1e-12 || v.init_hi > v.hi + 1e-12 {
                return Err(EncodeError::BadInitRange {
                    name: v.name.clone(),
                    lo: v.init_lo,
                    hi: v.init_hi,
                });
            }
        }
        let mut driven: HashSet<String> = HashSet::new();
        let mut drive = |name: &str| -> Result<(), EncodeError> {
            if !driven.insert(name.to_string()) {
                return Err(EncodeError::DoublyDriven(name.to_string()));
            }
            Ok(())
        };
        for b in self.normalized_blocks() {
            match &b {
                DynamicsBlock::PiecewiseConstantInput { var } => {
                    self.var_index(var)
                        .ok_or_else(|| EncodeError::UnknownVariable(var.clone()))?;
                    drive(var)?;
                }
                DynamicsBlock::IntegratorLink { state, rate } => {
                    for v in [state, rate] {
                        self.var_index(v)
                            .ok_or_else(|| EncodeError::UnknownVariable(v.clone()))?;
                    }
                    drive(state)?;
                }
                DynamicsBlock::DoubleIntegrator { .. } => unreachable!("expanded"),
                DynamicsBlock::RectangularAutomaton {
                    vars,
                    locations,
                    initial,
                } => {
                    for v in vars {
                        self.var_index(v)
                            .ok_or_else(|| EncodeError::UnknownVariable(v.clone()))?;
                        drive(v)?;
                    }
                    if locations.is_empty() {
                        return Err(EncodeError::NoLocations);
                    }
                    if initial.is_empty() {
                        return Err(EncodeError::NoInitialLocations);
                    }
                    for &q in initial {
                        if q >= locations.len() {
                            return Err(EncodeError::BadInitialLocation(q));
                        }
                    }
                    for loc in locations {
                        if loc.flow.len() != vars.len() {
                            return Err(EncodeError::BadLocationShape {
                                loc: loc.name.clone(),
                                what: "flow",
                            });
                        }
                        if loc.invariant.len() != vars.len() {
                            return Err(EncodeError::BadLocationShape {
                                loc: loc.name.clone(),
                                what: "invariant",
                            });
                        }
                        for (lo, hi) in loc.flow.iter() {
                            if lo > hi || !lo.is_finite() || !hi.is_finite() {
                                return Err(EncodeError::EmptyLocationInterval {
                                    loc: loc.name.clone(),
                                    what: "flow",
                                });
                            }
                        }
                        for (lo, hi) in loc.invariant.iter() {
                            if lo > hi {
                                return Err(EncodeError::EmptyLocationInterval {
                                    loc: loc.name.clone(),
                                    what: "invariant",
                                });
                            }
                        }
                    }
                    // Some initial location must admit a point of the
                    // initial region, else every encoding is infeasible.
                    let admits_init = initial.iter().any(|&q| {
                        vars.iter().enumerate().all(|(k, v)| {
                            let d = &self.vars[self.var_index(v).unwrap()];
                            let (blo, bhi) = locations[q].invariant[k];
                            d.init_lo <= bhi && d.init_hi >= blo
                        })
                    });
                    if !admits_init {
                        return Err(EncodeError::UnreachableInitialRegion);
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncodingConfig {
    /// Number of trace cells (N).
    pub cells: usize,
    /// Satisfaction margin required of atoms.
    pub delta: f64,
    /// Cell durations are multiples of horizon / (cells * time_resolution).
    pub time_resolution: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        EncodingConfig {
            cells: 10,
            delta: 0.01,
            time_resolution: 4,
        }
    }
}

impl EncodingConfig {
    pub fn validate(&self) -> Result<(), EncodeError> {
        if self.cells < 1 {
            return Err(EncodeError::BadCells);
        }
        if self.time_resolution < 1 {
            return Err(EncodeError::BadResolution);
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(EncodeError::BadDelta(self.delta));
        }
        Ok(())
    }
}

/// Ids of the decision variables the rest of the pipeline needs: boundary
/// times, durations and their bits, states, and the per-subformula cell
/// certificate bits in table order.
#[derive(Debug, Clone)]
pub struct EncodingHandles {
    pub cells: usize,
    pub horizon: f64,
    pub delta: f64,
    /// Duration grid unit.
    pub grid_unit: f64,
    pub var_names: Vec<String>,
    /// gamma[i], i = 0..=cells.
    pub gamma: Vec<VarId>,
    /// dt[i-1] is the duration of cell i, i = 1..=cells.
    pub dt: Vec<VarId>,
    /// dt_bits[i-1][b]: binary expansion of dt[i-1] in grid units.
    pub dt_bits: Vec<Vec<VarId>>,
    /// state[i][v]: value of variable v at boundary i.
    pub state: Vec<Vec<VarId>>,
    /// sub_bits[k][i-1]: certificate bit of table entry k on cell i.
    pub sub_bits: Vec<Vec<VarId>>,
    pub table: SubformulaTable,
    /// Per automaton block: loc_bits[a][i-1][q].
    pub loc_bits: Vec<Vec<Vec<VarId>>>,
}

/// Decoded feasible point.
#[derive(Debug, Clone)]
pub struct DecodedTrace {
    pub signal: TimedStateSequence,
    pub gammas: Vec<f64>,
    /// valuations[k][i-1]: certificate bit of table entry k on cell i.
    pub valuations: Vec<Vec<bool>>,
}

/// Compiles `formula` (negation normal form) under `model` into a MILP whose
/// feasible points are satisfying traces. The objective is left at zero.
pub fn encode(
    model: &SystemModel,
    formula: &Formula,
    config: &EncodingConfig,
) -> Result<(MilpModel, EncodingHandles), EncodeError> {
    model.validate()?;
    config.validate()?;
    for v in formula.variables() {
        if model.var_index(&v).is_none() {
            return Err(EncodeError::UnknownVariable(v));
        }
    }

    let n = config.cells;
    let t_end = model.horizon;
    let units = n * config.time_resolution;
    let g = t_end / units as f64;
    // Cell durations in grid units: at least 1, small enough that the other
    // cells keep their minimum.
    let nmax = units - n + 1;
    let bits = usize::BITS as usize - nmax.leading_zeros() as usize;

    let mut milp = MilpModel::new();

    // Boundary times and durations.
    let gamma: Vec<VarId> = (0..=n)
        .map(|i| {
            let (lo, hi) = if i == 0 {
                (0.0, 0.0)
            } else if i == n {
                (t_end, t_end)
            } else {
                (0.0, t_end)
            };
            milp.add_continuous(format!("gamma_{i}"), lo, hi)
        })
        .collect::<Result<_, _>>()?;
    let dt: Vec<VarId> = (1..=n)
        .map(|i| milp.add_continuous(format!("dt_{i}"), g, g * nmax as f64))
        .collect::<Result<_, _>>()?;
    let mut dt_bits: Vec<Vec<VarId>> = Vec::with_capacity(n);
    for i in 1..=n {
        let row: Vec<VarId> = (0..bits)
            .map(|b| milp.add_binary(format!("dtq_{i}_{b}")))
            .collect();
        // dt_i = g * sum 2^b q_b, with the unit count in [1, nmax].
        let mut terms: Vec<(VarId, f64)> = vec![(dt[i - 1], 1.0)];
        terms.extend(
            row.iter()
                .enumerate()
                .map(|(b, &q)| (q, -g * (1u64 << b) as f64)),
        );
        milp.add_constraint(format!("dt_def_{i}"), terms, Sense::Eq, 0.0)?;
        let units_terms: Vec<(VarId, f64)> = row
            .iter()
            .enumerate()
            .map(|(b, &q)| (q, (1u64 << b) as f64))
            .collect();
        milp.add_constraint(format!("dt_min_{i}"), units_terms.clone(), Sense::Ge, 1.0)?;
        milp.add_constraint(format!("dt_max_{i}"), units_terms, Sense::Le, nmax as f64)?;
        milp.add_constraint(
            format!("gamma_chain_{i}"),
            vec![(gamma[i], 1.0), (gamma[i - 1], -1.0), (dt[i - 1], -1.0)],
            Sense::Eq,
            0.0,
        )?;
        dt_bits.push(row);
    }

    // States at boundaries; initial ranges narrow the first boundary.
    let mut state: Vec<Vec<VarId>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let row: Vec<VarId> = model
            .vars
            .iter()
            .map(|v| {
                let (lo, hi) = if i == 0 {
                    (v.init_lo.max(v.lo), v.init_hi.min(v.hi))
                } else {
                    (v.lo, v.hi)
                };
                milp.add_continuous(format!("x_{i}_{}", v.name), lo, hi)
            })
            .collect::<Result<_, _>>()?;
        state.push(row);
    }

    let pwc = model.pwc_vars();
    let mut loc_bits: Vec<Vec<Vec<VarId>>> = Vec::new();
    let dt_max = g * nmax as f64;

    for (bidx, block) in model.normalized_blocks().iter().enumerate() {
        match block {
            DynamicsBlock::PiecewiseConstantInput { var } => {
                let v = model.var_index(var).unwrap();
                // Left-constant storage leaves the final boundary value
                // undefined; pin it to the last cell's value.
                milp.add_constraint(
                    format!("pwc_tail_{var}"),
                    vec![(state[n][v], 1.0), (state[n - 1][v], -1.0)],
                    Sense::Eq,
                    0.0,
                )?;
            }
            DynamicsBlock::IntegratorLink {
                state: sname,
                rate: rname,
            } => {
                let sv = model.var_index(sname).unwrap();
                let rv = model.var_index(rname).unwrap();
                let (rlo, rhi) = {
                    let d = &model.vars[rv];
                    (d.lo, d.hi)
                };
                for i in 1..=n {
                    // Mean rate over the cell: left value for a
                    // piecewise-constant rate, endpoint average otherwise.
                    let mean: VarId = if pwc.contains(rname) {
                        state[i - 1][rv]
                    } else {
                        let m =
                            milp.add_continuous(format!("mid_{sname}_{i}"), rlo, rhi)?;
                        milp.add_constraint(
                            format!("mid_def_{sname}_{i}"),
                            vec![
                                (m, 2.0),
                                (state[i - 1][rv], -1.0),
                                (state[i][rv], -1.0),
                            ],
                            Sense::Eq,
                            0.0,
                        )?;
                        m
                    };
                    let w = add_product_bits(
                        &mut milp,
                        &format!("w_{sname}_{i}"),
                        mean,
                        rlo,
                        rhi,
                        &dt_bits[i - 1],
                    )?;
                    // x_i - x_{i-1} = g sum 2^b w_b + rlo dt_i.
                    let mut terms: Vec<(VarId, f64)> = vec![
                        (state[i][sv], 1.0),
                        (state[i - 1][sv], -1.0),
                        (dt[i - 1], -rlo),
                    ];
                    terms.extend(
                        w.iter()
                            .enumerate()
                            .map(|(b, &wb)| (wb, -g * (1u64 << b) as f64)),
                    );
                    milp.add_constraint(format!("int_{sname}_{i}"), terms, Sense::Eq, 0.0)?;
                }
            }
            DynamicsBlock::DoubleIntegrator { .. } => unreachable!("expanded"),
            DynamicsBlock::RectangularAutomaton {
                vars,
                locations,
                initial,
            } => {
                let vids: Vec<usize> = vars.iter().map(|v| model.var_index(v).unwrap()).collect();
                let mut bits_per_cell: Vec<Vec<VarId>> = Vec::with_capacity(n);
                for i in 1..=n {
                    let row: Vec<VarId> = (0..locations.len())
                        .map(|q| milp.add_binary(format!("loc{bidx}_{i}_{q}")))
                        .collect();
                    milp.add_constraint(
                        format!("loc{bidx}_one_{i}"),
                        row.iter().map(|&l| (l, 1.0)).collect(),
                        Sense::Eq,
                        1.0,
                    )?;
                    bits_per_cell.push(row);
                }
                milp.add_constraint(
                    format!("loc{bidx}_init"),
                    initial.iter().map(|&q| (bits_per_cell[0][q], 1.0)).collect(),
                    Sense::Eq,
                    1.0,
                )?;
                for i in 1..=n {
                    for (q, loc) in locations.iter().enumerate() {
                        let l = bits_per_cell[i - 1][q];
                        for (k, &v) in vids.iter().enumerate() {
                            let d = &model.vars[v];
                            let width = d.hi - d.lo;
                            let (flo, fhi) = loc.flow[k];
                            let m_flow =
                                width + flo.abs().max(fhi.abs()) * dt_max + 1.0;
                            // l = 1 forces flo dt <= x_i - x_{i-1} <= fhi dt.
                            milp.add_constraint(
                                format!("flow_hi_{bidx}_{i}_{q}_{k}"),
                                vec![
                                    (state[i][v], 1.0),
                                    (state[i - 1][v], -1.0),
                                    (dt[i - 1], -fhi),
                                    (l, m_flow),
                                ],
                                Sense::Le,
                                m_flow,
                            )?;
                            milp.add_constraint(
                                format!("flow_lo_{bidx}_{i}_{q}_{k}"),
                                vec![
                                    (state[i][v], 1.0),
                                    (state[i - 1][v], -1.0),
                                    (dt[i - 1], -flo),
                                    (l, -m_flow),
                                ],
                                Sense::Ge,
                                -m_flow,
                            )?;
                            // Both endpoints inside the invariant box.
                            let (blo, bhi) = loc.invariant[k];
                            let m_inv = width + 1.0;
                            for (side, &xid) in
                                [("a", &state[i - 1][v]), ("b", &state[i][v])]
                            {
                                if blo.is_finite() && blo > d.lo {
                                    milp.add_constraint(
                                        format!("inv_lo_{bidx}_{i}_{q}_{k}{side}"),
                                        vec![(xid, 1.0), (l, -m_inv)],
                                        Sense::Ge,
                                        blo - m_inv,
                                    )?;
                                }
                                if bhi.is_finite() && bhi < d.hi {
                                    milp.add_constraint(
                                        format!("inv_hi_{bidx}_{i}_{q}_{k}{side}"),
                                        vec![(xid, 1.0), (l, m_inv)],
                                        Sense::Le,
                                        bhi + m_inv,
                                    )?;
                                }
                            }
                        }
                    }
                }
                loc_bits.push(bits_per_cell);
            }
        }
    }

    // Certificate bits per subformula and cell.
    let table = SubformulaTable::build(formula);
    let mut sub_bits: Vec<Vec<VarId>> = Vec::with_capacity(table.len());
    for k in 0..table.len() {
        let row: Vec<VarId> = (1..=n)
            .map(|i| milp.add_binary(format!("sub{k}_{i}")))
            .collect();
        sub_bits.push(row);
    }

    let ctx = StlContext {
        milp: &mut milp,
        model,
        state: &state,
        gamma: &gamma,
        sub_bits: &sub_bits,
        table: &table,
        n,
        g,
        t_end,
        delta: config.delta,
    };
    emit_stl_rows(ctx)?;

    match formula {
        Formula::True => {}
        Formula::False => {
            milp.add_constraint("root_unsatisfiable", vec![], Sense::Ge, 1.0)?;
        }
        _ => {
            let root = sub_bits[table.root_index()][0];
            milp.fix_var(root, 1.0)?;
        }
    }

    let handles = EncodingHandles {
        cells: n,
        horizon: t_end,
        delta: config.delta,
        grid_unit: g,
        var_names: model.var_names(),
        gamma,
        dt,
        dt_bits,
        state,
        sub_bits,
        table,
        loc_bits,
    };
    Ok((milp, handles))
}

/// Binary-expansion product: returns w_b with w_b = q_b * (z - zlo), so that
/// z * dt = g * sum 2^b w_b + zlo * dt.
fn add_product_bits(
    milp: &mut MilpModel,
    prefix: &str,
    z: VarId,
    zlo: f64,
    zhi: f64,
    q_bits: &[VarId],
) -> Result<Vec<VarId>, EncodeError> {
    let range = zhi - zlo;
    let mut out = Vec::with_capacity(q_bits.len());
    for (b, &q) in q_bits.iter().enumerate() {
        let w = milp.add_continuous(format!("{prefix}_{b}"), 0.0, range)?;
        milp.add_constraint(
            format!("{prefix}_{b}_cap"),
            vec![(w, 1.0), (q, -range)],
            Sense::Le,
            0.0,
        )?;
        milp.add_constraint(
            format!("{prefix}_{b}_le"),
            vec![(w, 1.0), (z, -1.0)],
            Sense::Le,
            -zlo,
        )?;
        milp.add_constraint(
            format!("{prefix}_{b}_ge"),
            vec![(w, 1.0), (z, -1.0), (q, -range)],
            Sense::Ge,
            -zlo - range,
        )?;
        out.push(w);
    }
    Ok(out)
}

struct StlContext<'a> {
    milp: &'a mut MilpModel,
    model: &'a SystemModel,
    state: &'a [Vec<VarId>],
    gamma: &'a [VarId],
    sub_bits: &'a [Vec<VarId>],
    table: &'a SubformulaTable,
    n: usize,
    g: f64,
    t_end: f64,
    delta: f64,
}

/// A certificate: one binary implying a set of rows. When a cell has exactly
/// one certificate the subformula bit itself plays the binary.
struct Cert {
    name: String,
    rows: Vec<CondRow>,
}

/// Row activated by a certificate binary `c`: terms + coeff_c * c SENSE rhs,
/// where coeff_c is chosen to make the row vacuous at c = 0.
struct CondRow {
    name: String,
    terms: Vec<(VarId, f64)>,
    coeff_c: f64,
    sense: Sense,
    rhs: f64,
}

fn emit_stl_rows(ctx: StlContext<'_>) -> Result<(), EncodeError> {
    let StlContext {
        milp,
        model,
        state,
        gamma,
        sub_bits,
        table,
        n,
        g,
        t_end,
        delta,
    } = ctx;

    // Bit of a child on a cell; constants have no bits and are handled by
    // the caller.
    let bit_of = |f: &Formula, cell: usize| -> VarId {
        let k = table.index_of(f).expect("children precede parents");
        sub_bits[k][cell - 1]
    };

    for (k, entry) in table.iter().enumerate() {
        match entry {
            Formula::True | Formula::False => unreachable!("constants not in table"),
            Formula::Atom(a) => {
                emit_atom_rows(milp, model, state, &sub_bits[k], a.terms(), a.offset(), delta, k)?;
            }
            Formula::NegAtom(a) => {
                // not(p >= 0) holds with margin when -p >= delta.
                let neg = a.negated();
                emit_atom_rows(
                    milp,
                    model,
                    state,
                    &sub_bits[k],
                    neg.terms(),
                    neg.offset(),
                    delta,
                    k,
                )?;
            }
            Formula::And(children) => {
                for i in 1..=n {
                    let b = sub_bits[k][i - 1];
                    let mut live = 0usize;
                    let mut sum: Vec<(VarId, f64)> = vec![(b, 1.0)];
                    let mut forced_false = false;
                    for (ci, c) in children.iter().enumerate() {
                        match c {
                            Formula::True => {}
                            Formula::False => forced_false = true,
                            _ => {
                                let cb = bit_of(c, i);
                                milp.add_constraint(
                                    format!("and{k}_{i}_le{ci}"),
                                    vec![(b, 1.0), (cb, -1.0)],
                                    Sense::Le,
                                    0.0,
                                )?;
                                sum.push((cb, -1.0));
                                live += 1;
                            }
                        }
                    }
                    if forced_false {
                        milp.fix_var(b, 0.0)?;
                        continue;
                    }
                    if live > 0 {
                        milp.add_constraint(
                            format!("and{k}_{i}_ge"),
                            sum,
                            Sense::Ge,
                            1.0 - live as f64,
                        )?;
                    }
                }
            }
            Formula::Or(children) => {
                for i in 1..=n {
                    let b = sub_bits[k][i - 1];
                    if children.iter().any(|c| matches!(c, Formula::True)) {
                        continue; // bit is free to be 1
                    }
                    let mut sum: Vec<(VarId, f64)> = vec![(b, 1.0)];
                    for (ci, c) in children.iter().enumerate() {
                        if matches!(c, Formula::False) {
                            continue;
                        }
                        let cb = bit_of(c, i);
                        milp.add_constraint(
                            format!("or{k}_{i}_ge{ci}"),
                            vec![(b, 1.0), (cb, -1.0)],
                            Sense::Ge,
                            0.0,
                        )?;
                        sum.push((cb, -1.0));
                    }
                    if sum.len() == 1 {
                        milp.fix_var(b, 0.0)?; // all children constant false
                    } else {
                        milp.add_constraint(format!("or{k}_{i}_le"), sum, Sense::Le, 0.0)?;
                    }
                }
            }
            Formula::Until(window, lhs, rhs) => {
                for i in 1..=n {
                    let certs = until_certs(
                        k, i, window, lhs, rhs, n, g, t_end, gamma, table, sub_bits,
                    );
                    attach_certs(milp, sub_bits[k][i - 1], certs)?;
                }
            }
            Formula::Release(window, lhs, rhs) => {
                for i in 1..=n {
                    let certs = release_certs(
                        k, i, window, lhs, rhs, n, g, t_end, gamma, table, sub_bits,
                    );
                    attach_certs(milp, sub_bits[k][i - 1], certs)?;
                }
            }
        }
    }
    Ok(())
}

/// Certificate bit forces the atom to clear `delta` at both cell endpoints;
/// affine signals then clear it on the whole cell.
#[allow(clippy::too_many_arguments)]
fn emit_atom_rows(
    milp: &mut MilpModel,
    model: &SystemModel,
    state: &[Vec<VarId>],
    bits: &[VarId],
    terms: &[(String, f64)],
    offset: f64,
    delta: f64,
    k: usize,
) -> Result<(), EncodeError> {
    let resolved: Vec<(usize, f64)> = terms
        .iter()
        .map(|(name, c)| (model.var_index(name).expect("validated"), *c))
        .collect();
    let min_box: f64 = resolved
        .iter()
        .map(|&(v, c)| {
            let d = &model.vars[v];
            (c * d.lo).min(c * d.hi)
        })
        .sum::<f64>()
        + offset;
    let big = (delta - min_box + 1.0).max(1.0);
    for (i, &b) in bits.iter().enumerate() {
        let cell = i + 1;
        for (tag, endpoint) in [("a", cell - 1), ("b", cell)] {
            let mut row: Vec<(VarId, f64)> = resolved
                .iter()
                .map(|&(v, c)| (state[endpoint][v], c))
                .collect();
            row.push((b, -big));
            milp.add_constraint(
                format!("atom{k}_{cell}{tag}"),
                row,
                Sense::Ge,
                delta - offset - big,
            )?;
        }
    }
    Ok(())
}

/// Attaches certificates to a subformula bit: none fixes the bit to 0, one
/// reuses the bit itself, several get their own binaries plus a linking row.
fn attach_certs(milp: &mut MilpModel, bit: VarId, certs: Vec<Cert>) -> Result<(), EncodeError> {
    fn emit(milp: &mut MilpModel, binary: VarId, rows: Vec<CondRow>) -> Result<(), EncodeError> {
        for r in rows {
            let mut terms = r.terms;
            terms.push((binary, r.coeff_c));
            milp.add_constraint(r.name, terms, r.sense, r.rhs)?;
        }
        Ok(())
    }
    match certs.len() {
        0 => milp.fix_var(bit, 0.0)?,
        1 => {
            let cert = certs.into_iter().next().unwrap();
            emit(milp, bit, cert.rows)?;
        }
        _ => {
            let mut link: Vec<(VarId, f64)> = vec![(bit, 1.0)];
            for cert in certs {
                let c = milp.add_binary(&cert.name);
                emit(milp, c, cert.rows)?;
                link.push((c, -1.0));
            }
            let name = format!("{}_any", milp.var(bit).name.clone());
            milp.add_constraint(name, link, Sense::Le, 0.0)?;
        }
    }
    Ok(())
}

/// Witness certificates for `lhs U[window] rhs` on cell i: a witness cell j
/// where rhs holds, reachable within the window from every point of cell i,
/// with lhs holding on all of cells i..j.
#[allow(clippy::too_many_arguments)]
fn until_certs(
    k: usize,
    i: usize,
    window: &Interval,
    lhs: &Formula,
    rhs: &Formula,
    n: usize,
    g: f64,
    t_end: f64,
    gamma: &[VarId],
    table: &SubformulaTable,
    sub_bits: &[Vec<VarId>],
) -> Vec<Cert> {
    let (a, bnd) = (window.lo(), window.hi());
    let eps = 1e-9 * (1.0 + t_end);
    let bit_of = |f: &Formula, cell: usize| -> VarId {
        sub_bits[table.index_of(f).expect("child in table")][cell - 1]
    };
    // A constant-false side leaves no witness this one-sided scheme can
    // certify: the bit stays 0.
    if matches!(rhs, Formula::False) || matches!(lhs, Formula::False) {
        return Vec::new();
    }
    let mut certs = Vec::new();
    for j in i..=n {
        if j == i && a > 0.0 {
            continue; // witness inside the evaluation cell needs a = 0
        }
        // Cheapest possible span between the boundary times referenced by
        // the window rows; skip certificates that can never activate.
        if bnd.is_finite() && ((j - i) as f64) * g > bnd + eps {
            continue;
        }
        if a > 0.0 {
            let max_span = t_end - ((n - j) as f64) * g - (i as f64) * g;
            if max_span < a - eps {
                continue;
            }
        }
        let mut rows = Vec::new();
        if !matches!(rhs, Formula::True) {
            rows.push(CondRow {
                name: format!("u{k}_{i}_{j}_rhs"),
                terms: vec![(bit_of(rhs, j), 1.0)],
                coeff_c: -1.0,
                sense: Sense::Ge,
                rhs: 0.0,
            });
        }
        if !matches!(lhs, Formula::True) {
            let terms: Vec<(VarId, f64)> = (i..=j).map(|c| (bit_of(lhs, c), 1.0)).collect();
            let count = terms.len() as f64;
            rows.push(CondRow {
                name: format!("u{k}_{i}_{j}_lhs"),
                terms,
                coeff_c: -count,
                sense: Sense::Ge,
                rhs: 0.0,
            });
        }
        if a > 0.0 {
            // gamma_i + a <= gamma_j when active.
            let m = a + 1.0;
            rows.push(CondRow {
                name: format!("u{k}_{i}_{j}_lo"),
                terms: vec![(gamma[i], 1.0), (gamma[j], -1.0)],
                coeff_c: m,
                sense: Sense::Le,
                rhs: m - a,
            });
        }
        if bnd.is_finite() && bnd < t_end {
            // gamma_{j-1} <= gamma_{i-1} + bnd when active.
            let m = (t_end - bnd + 1.0).max(1.0);
            rows.push(CondRow {
                name: format!("u{k}_{i}_{j}_hi"),
                terms: vec![(gamma[j - 1], 1.0), (gamma[i - 1], -1.0)],
                coeff_c: m,
                sense: Sense::Le,
                rhs: m + bnd,
            });
        }
        certs.push(Cert {
            name: format!("u{k}_{i}_{j}"),
            rows,
        });
    }
    certs
}

/// Certificates for `lhs R[window] rhs` on cell i. Covers keep rhs true
/// across the whole window (to a boundary past it, or to the horizon, whose
/// constant extension carries the final cell's truth onward); releases keep
/// rhs true from the window start until a cell where lhs holds throughout.
#[allow(clippy::too_many_arguments)]
fn release_certs(
    k: usize,
    i: usize,
    window: &Interval,
    lhs: &Formula,
    rhs: &Formula,
    n: usize,
    g: f64,
    t_end: f64,
    gamma: &[VarId],
    table: &SubformulaTable,
    sub_bits: &[Vec<VarId>],
) -> Vec<Cert> {
    let (a, bnd) = (window.lo(), window.hi());
    let eps = 1e-9 * (1.0 + t_end);
    let bit_of = |f: &Formula, cell: usize| -> VarId {
        sub_bits[table.index_of(f).expect("child in table")][cell - 1]
    };
    // Window-start row: cell j1 must begin at or before gamma_{i-1} + a.
    let start_row = |j1: usize, name: String| -> Option<CondRow> {
        if j1 == i {
            return None; // gamma_{i-1} <= gamma_{i-1} + a always
        }
        let m = t_end - a + 1.0;
        Some(CondRow {
            name,
            terms: vec![(gamma[j1 - 1], 1.0), (gamma[i - 1], -1.0)],
            coeff_c: m,
            sense: Sense::Le,
            rhs: m + a,
        })
    };
    let rhs_agg = |j1: usize, j2: usize, name: String| -> CondRow {
        let terms: Vec<(VarId, f64)> = (j1..=j2).map(|c| (bit_of(rhs, c), 1.0)).collect();
        let count = terms.len() as f64;
        CondRow {
            name,
            terms,
            coeff_c: -count,
            sense: Sense::Ge,
            rhs: 0.0,
        }
    };
    let start_ok = |j1: usize| j1 == i || ((j1 - i) as f64) * g <= a + eps;

    let mut certs = Vec::new();
    let rhs_constant_true = matches!(rhs, Formula::True);
    let rhs_constant_false = matches!(rhs, Formula::False);

    // Covers. rhs = True would make every cover row vacuous; one empty
    // certificate keeps the bit free in that degenerate case. rhs = False
    // admits no cover at all.
    if rhs_constant_true {
        certs.push(Cert {
            name: format!("r{k}_{i}_trivial"),
            rows: Vec::new(),
        });
    } else if !rhs_constant_false {
        for j1 in i..=n {
            if !start_ok(j1) {
                continue;
            }
            // Bounded cover: rhs on cells j1..j2 with gamma_{j2} past the
            // window end for every point of cell i.
            if bnd.is_finite() {
                for j2 in j1..=n {
                    let max_reach =
                        t_end - ((n - j2) as f64) * g - (i as f64) * g;
                    if max_reach < bnd - eps {
                        continue;
                    }
                    let mut rows = Vec::new();
                    if let Some(r) = start_row(j1, format!("r{k}_{i}_c{j1}_{j2}_s")) {
                        rows.push(r);
                    }
                    let m = bnd + 1.0;
                    rows.push(CondRow {
                        name: format!("r{k}_{i}_c{j1}_{j2}_e"),
                        terms: vec![(gamma[j2], 1.0), (gamma[i], -1.0)],
                        coeff_c: -m,
                        sense: Sense::Ge,
                        rhs: bnd - m,
                    });
                    rows.push(rhs_agg(j1, j2, format!("r{k}_{i}_c{j1}_{j2}_r")));
                    certs.push(Cert {
                        name: format!("r{k}_{i}_c{j1}_{j2}"),
                        rows,
                    });
                }
            }
            // Horizon cover: rhs from j1 to the end of the trace; beyond the
            // horizon the signal is constant, so the final cell's truth
            // extends to every later window point.
            let mut rows = Vec::new();
            if let Some(r) = start_row(j1, format!("r{k}_{i}_h{j1}_s")) {
                rows.push(r);
            }
            rows.push(rhs_agg(j1, n, format!("r{k}_{i}_h{j1}_r")));
            certs.push(Cert {
                name: format!("r{k}_{i}_h{j1}"),
                rows,
            });
        }
    }

    // Releases: rhs on j1..j-1, lhs throughout cell j.
    if !matches!(lhs, Formula::False) {
        for j1 in i..=n {
            if !start_ok(j1) {
                continue;
            }
            for j in j1..=n {
                if j > j1 && rhs_constant_false {
                    break; // the nonempty prefix would need rhs
                }
                let mut rows = Vec::new();
                if let Some(r) = start_row(j1, format!("r{k}_{i}_l{j1}_{j}_s")) {
                    rows.push(r);
                }
                if j > j1 && !rhs_constant_true {
                    rows.push(rhs_agg(j1, j - 1, format!("r{k}_{i}_l{j1}_{j}_r")));
                }
                if !matches!(lhs, Formula::True) {
                    rows.push(CondRow {
                        name: format!("r{k}_{i}_l{j1}_{j}_f"),
                        terms: vec![(bit_of(lhs, j), 1.0)],
                        coeff_c: -1.0,
                        sense: Sense::Ge,
                        rhs: 0.0,
                    });
                }
                certs.push(Cert {
                    name: format!("r{k}_{i}_l{j1}_{j}"),
                    rows,
                });
            }
        }
    }
    certs
}

/// Reads a feasible assignment back into a trace and its certificate bits.
pub fn decode(
    model: &SystemModel,
    handles: &EncodingHandles,
    values: &[f64],
) -> Result<DecodedTrace, EncodeError> {
    let n = handles.cells;
    let mut gammas: Vec<f64> = handles.gamma.iter().map(|&id| values[id]).collect();
    gammas[0] = 0.0;
    gammas[n] = handles.horizon;
    for w in gammas.windows(2) {
        if w[1] <= w[0] {
            return Err(EncodeError::NonMonotoneBoundaries);
        }
    }
    let states: Vec<Vec<f64>> = handles
        .state
        .iter()
        .map(|row| row.iter().map(|&id| values[id]).collect())
        .collect();
    let signal = TimedStateSequence::new(
        model.var_names(),
        TimeSequence::new(gammas.clone())?,
        states,
    )?;
    let valuations: Vec<Vec<bool>> = handles
        .sub_bits
        .iter()
        .map(|row| row.iter().map(|&id| values[id] > 0.5).collect())
        .collect();
    Ok(DecodedTrace {
        signal,
        gammas,
        valuations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve, SolveParams, Status};
    use crate::stl::{eval_boolean, parse};

    fn single_var_model() -> SystemModel {
        SystemModel {
            name: "toy".into(),
            horizon: 4.0,
            vars: vec![VarDef::new("x", 0.0, 10.0)],
            blocks: vec![],
        }
    }

    fn small_config(cells: usize) -> EncodingConfig {
        EncodingConfig {
            cells,
            delta: 0.01,
            time_resolution: 4,
        }
    }

    #[test]
    fn validation_rejects_bad_models() {
        let mut m = single_var_model();
        m.vars.push(VarDef::new("x", 0.0, 1.0));
        assert!(matches!(m.validate(), Err(EncodeError::DuplicateVariable(_))));

        let mut m = single_var_model();
        m.vars[0].hi = f64::INFINITY;
        assert!(matches!(m.validate(), Err(EncodeError::BadVarBounds { .. })));

        let mut m = single_var_model();
        m.vars[0].init_hi = 20.0;
        assert!(matches!(m.validate(), Err(EncodeError::BadInitRange { .. })));

        let mut m = single_var_model();
        m.blocks.push(DynamicsBlock::IntegratorLink {
            state: "x".into(),
            rate: "nope".into(),
        });
        assert!(matches!(m.validate(), Err(EncodeError::UnknownVariable(_))));

        let mut m = single_var_model();
        m.blocks.push(DynamicsBlock::PiecewiseConstantInput { var: "x".into() });
        m.blocks.push(DynamicsBlock::PiecewiseConstantInput { var: "x".into() });
        assert!(matches!(m.validate(), Err(EncodeError::DoublyDriven(_))));
    }

    #[test]
    fn automaton_validation() {
        let base = |locations: Vec<Location>, initial: Vec<usize>| SystemModel {
            name: "rha".into(),
            horizon: 2.0,
            vars: vec![VarDef::new("x", 0.0, 10.0).with_init(0.0, 1.0)],
            blocks: vec![DynamicsBlock::RectangularAutomaton {
                vars: vec!["x".into()],
                locations,
                initial,
            }],
        };
        assert!(matches!(
            base(vec![], vec![]).validate(),
            Err(EncodeError::NoLocations)
        ));
        let loc = Location {
            name: "q0".into(),
            flow: vec![(0.0, 1.0)],
            invariant: vec![(0.0, 10.0)],
        };
        assert!(matches!(
            base(vec![loc.clone()], vec![]).validate(),
            Err(EncodeError::NoInitialLocations)
        ));
        assert!(matches!(
            base(vec![loc.clone()], vec![3]).validate(),
            Err(EncodeError::BadInitialLocation(3))
        ));
        let far = Location {
            name: "far".into(),
            flow: vec![(0.0, 1.0)],
            invariant: vec![(5.0, 10.0)],
        };
        assert!(matches!(
            base(vec![far], vec![0]).validate(),
            Err(EncodeError::UnreachableInitialRegion)
        ));
        assert!(base(vec![loc], vec![0]).validate().is_ok());
    }

    #[test]
    fn atom_certificate_enforces_margin_at_both_endpoints() {
        let m = single_var_model();
        let f = parse("x >= 3", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(1)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal);
        let decoded = decode(&m, &handles, &sol.values.as_ref().unwrap()).unwrap();
        for row in decoded.signal.states() {
            assert!(row[0] >= 3.0 + handles.delta - 1e-6, "margin violated: {}", row[0]);
        }
        assert!(decoded.valuations[0][0]);
    }

    #[test]
    fn contradiction_is_infeasible() {
        let m = single_var_model();
        let f = parse("x >= 3 && !(x >= 3)", &m.var_names()).unwrap();
        let (milp, _) = encode(&m, &f, &small_config(2)).unwrap();
        assert_eq!(solve(&milp, &SolveParams::default()).status, Status::Infeasible);
    }

    #[test]
    fn constant_roots() {
        let m = single_var_model();
        let (milp, handles) = encode(&m, &Formula::True, &small_config(2)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal);
        let d = decode(&m, &handles, &sol.values.as_ref().unwrap()).unwrap();
        assert!(d.valuations.is_empty());
        let (milp, _) = encode(&m, &Formula::False, &small_config(2)).unwrap();
        assert_eq!(solve(&milp, &SolveParams::default()).status, Status::Infeasible);
    }

    #[test]
    fn partition_is_legal_and_on_grid() {
        let m = single_var_model();
        let f = parse("x >= 0", &m.var_names()).unwrap();
        let cfg = small_config(4);
        let (milp, handles) = encode(&m, &f, &cfg).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        let v = sol.values.unwrap();
        let d = decode(&m, &handles, &v).unwrap();
        assert_eq!(d.gammas.len(), 5);
        assert_eq!(d.gammas[0], 0.0);
        assert_eq!(d.gammas[4], 4.0);
        for w in d.gammas.windows(2) {
            let dt = w[1] - w[0];
            assert!(dt >= handles.grid_unit - 1e-6);
            let units = dt / handles.grid_unit;
            assert!((units - units.round()).abs() < 1e-6, "off grid: {units}");
        }
    }

    fn running_example_model() -> SystemModel {
        SystemModel {
            name: "cruise".into(),
            horizon: 20.0,
            vars: vec![
                VarDef::new("x", 0.0, 40.0).with_init(0.0, 0.0),
                VarDef::new("v", -5.0, 5.0).with_init(0.0, 0.0),
                VarDef::new("a", -3.0, 3.0).with_init(0.0, 0.0),
            ],
            blocks: vec![
                DynamicsBlock::PiecewiseConstantInput { var: "a".into() },
                DynamicsBlock::DoubleIntegrator {
                    pos: "x".into(),
                    vel: "v".into(),
                    acc: "a".into(),
                },
            ],
        }
    }

    #[test]
    fn integrator_chain_solves_and_monitors() {
        let m = running_example_model();
        let f = parse("Ev(Alw[0,5](x <= 10))", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(10)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal, "expected a satisfying trace");
        let v = sol.values.unwrap();
        assert!(milp.check_solution(&v, 1e-5).is_empty());
        let d = decode(&m, &handles, &v).unwrap();
        assert!(
            eval_boolean(&d.signal, &f, 0.0, 0.05).unwrap(),
            "decoded trace must satisfy the formula"
        );
    }

    #[test]
    fn integrator_updates_are_exact() {
        let m = running_example_model();
        let f = parse("Ev[0,10](x >= 2)", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(6)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal);
        let vals = sol.values.unwrap();
        let d = decode(&m, &handles, &vals).unwrap();
        let states = d.signal.states();
        let (xi, vi, ai) = (0usize, 1usize, 2usize);
        for i in 1..=6 {
            let dt = d.gammas[i] - d.gammas[i - 1];
            // v integrates the piecewise-constant a with its left value.
            let dv = states[i][vi] - states[i - 1][vi];
            assert!((dv - states[i - 1][ai] * dt).abs() < 1e-5, "cell {i}: {dv}");
            // x integrates v with the endpoint average.
            let dx = states[i][xi] - states[i - 1][xi];
            let mean = 0.5 * (states[i - 1][vi] + states[i][vi]);
            assert!((dx - mean * dt).abs() < 1e-5, "cell {i}: {dx} vs {mean}*{dt}");
        }
        // Piecewise-constant input repeats its last cell value at the end.
        assert!((states[6][ai] - states[5][ai]).abs() < 1e-9);
    }

    #[test]
    fn automaton_exclusivity_and_flow() {
        let m = SystemModel {
            name: "switcher".into(),
            horizon: 4.0,
            vars: vec![VarDef::new("x", 0.0, 10.0).with_init(0.0, 0.0)],
            blocks: vec![DynamicsBlock::RectangularAutomaton {
                vars: vec!["x".into()],
                locations: vec![
                    Location {
                        name: "up".into(),
                        flow: vec![(1.0, 2.0)],
                        invariant: vec![(0.0, 6.0)],
                    },
                    Location {
                        name: "down".into(),
                        flow: vec![(-2.0, -1.0)],
                        invariant: vec![(2.0, 10.0)],
                    },
                ],
                initial: vec![0],
            }],
        };
        let f = parse("Ev[0,4](x >= 3)", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(3)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal);
        let vals = sol.values.unwrap();
        let d = decode(&m, &handles, &vals).unwrap();
        let states = d.signal.states();
        assert_eq!(handles.loc_bits.len(), 1);
        for i in 1..=3 {
            let active: Vec<usize> = (0..2)
                .filter(|&q| vals[handles.loc_bits[0][i - 1][q]] > 0.5)
                .collect();
            assert_eq!(active.len(), 1, "cell {i} has one active location");
            let q = active[0];
            let dt = d.gammas[i] - d.gammas[i - 1];
            let dx = states[i][0] - states[i - 1][0];
            let (flo, fhi) = [(1.0, 2.0), (-2.0, -1.0)][q];
            assert!(dx >= flo * dt - 1e-5 && dx <= fhi * dt + 1e-5, "cell {i} flow");
            let (blo, bhi) = [(0.0, 6.0), (2.0, 10.0)][q];
            for x in [states[i - 1][0], states[i][0]] {
                assert!(x >= blo - 1e-5 && x <= bhi + 1e-5, "cell {i} invariant");
            }
        }
        // Initial location must be the declared one.
        assert!(vals[handles.loc_bits[0][0][0]] > 0.5);
    }

    #[test]
    fn until_with_lower_window_bound_waits() {
        // x ramps down from 5; (x >= 0) U[2,4] (x <= 1) forces the witness
        // after time 2.
        let m = SystemModel {
            name: "wait".into(),
            horizon: 4.0,
            vars: vec![
                VarDef::new("x", -10.0, 10.0).with_init(5.0, 5.0),
                VarDef::new("r", -3.0, 3.0),
            ],
            blocks: vec![
                DynamicsBlock::PiecewiseConstantInput { var: "r".into() },
                DynamicsBlock::IntegratorLink {
                    state: "x".into(),
                    rate: "r".into(),
                },
            ],
        };
        let f = parse("(x >= 0) U[2,4] (x <= 1)", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(4)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal);
        let d = decode(&m, &handles, &sol.values.unwrap()).unwrap();
        assert!(eval_boolean(&d.signal, &f, 0.0, 0.02).unwrap());
    }

    #[test]
    fn release_window_is_honored() {
        // Alw[1,3](x <= 6) with x starting at 0 and a free rate.
        let m = SystemModel {
            name: "hold".into(),
            horizon: 4.0,
            vars: vec![
                VarDef::new("x", -10.0, 10.0).with_init(0.0, 0.0),
                VarDef::new("r", -3.0, 3.0),
            ],
            blocks: vec![
                DynamicsBlock::PiecewiseConstantInput { var: "r".into() },
                DynamicsBlock::IntegratorLink {
                    state: "x".into(),
                    rate: "r".into(),
                },
            ],
        };
        let f = parse("Alw[1,3](x <= 6) && Ev[0,4](x >= 5)", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(4)).unwrap();
        let sol = solve(&milp, &SolveParams::default());
        assert_eq!(sol.status, Status::Optimal);
        let d = decode(&m, &handles, &sol.values.unwrap()).unwrap();
        assert!(eval_boolean(&d.signal, &f, 0.0, 0.02).unwrap());
    }

    #[test]
    fn debug_running_example_hand_point() {
        let m = running_example_model();
        let f = parse("Ev(Alw[0,5](x <= 10))", &m.var_names()).unwrap();
        let (milp, handles) = encode(&m, &f, &small_config(10)).unwrap();
        let mut v = vec![0.0; milp.num_vars()];
        for i in 0..=10 {
            v[handles.gamma[i]] = 2.0 * i as f64;
        }
        for i in 0..10 {
            v[handles.dt[i]] = 2.0;
            v[handles.dt_bits[i][2]] = 1.0; // 4 units * 0.5
        }
        // states all zero already; mids zero; w bits: z - zlo at set bits
        for (id, var) in milp.vars().iter().enumerate() {
            if var.name.starts_with("w_x_") && var.name.ends_with("_2") {
                v[id] = 5.0;
            }
            if var.name.starts_with("w_v_") && var.name.ends_with("_2") {
                v[id] = 3.0;
            }
        }
        for i in 0..10 {
            v[handles.sub_bits[0][i]] = 1.0; // atom holds everywhere
        }
        v[handles.sub_bits[1][0]] = 1.0; // release at cell 1
        v[handles.sub_bits[2][0]] = 1.0; // until root at cell 1
        for (id, var) in milp.vars().iter().enumerate() {
            if var.name == "r1_1_h1" || var.name == "u2_1_1" {
                v[id] = 1.0;
            }
        }
        let violations = milp.check_solution(&v, 1e-6);
        assert!(violations.is_empty(), "violated: {violations:?}");
        use crate::milp::simplex::Tableau;
        let lo0: Vec<f64> = milp.vars().iter().map(|x| x.lo).collect();
        let hi0: Vec<f64> = milp.vars().iter().map(|x| x.hi).collect();
        let mut fixed_lo = lo0.clone();
        let mut fixed_hi = hi0.clone();
        for (id, var) in milp.vars().iter().enumerate() {
            if var.kind == VarKind::Binary {
                fixed_lo[id] = v[id];
                fixed_hi[id] = v[id];
            }
        }
        let mut warm = Tableau::new(&milp);
        let r_root = warm.solve_with_bounds(&lo0, &hi0);
        let r_warm = warm.solve_with_bounds(&fixed_lo, &fixed_hi);
        let mut cold = Tableau::new(&milp);
        let r_cold = cold.solve_with_bounds(&fixed_lo, &fixed_hi);
        eprintln!(
            "root={:?} warm_fixed={:?} cold_fixed={:?}",
            r_root.status, r_warm.status, r_cold.status
        );
    }

    #[test]
    fn unknown_formula_variable_is_rejected() {
        let m = single_var_model();
        let f = crate::stl::to_nnf(&crate::stl::Expr::Atom(
            crate::stl::AffineAtom::single("ghost", 1.0, 0.0),
        ));
        assert!(matches!(
            encode(&m, &f, &small_config(2)),
            Err(EncodeError::UnknownVariable(_))
        ));
    }
}
