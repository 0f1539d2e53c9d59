//! Piecewise-linear signals over a searched time partition.
//!
//! A signal is a sequence of states attached to strictly increasing time
//! points starting at zero. Between points the signal interpolates linearly;
//! past the last point it extends with the final state held constant. The
//! average pairwise Euclidean distance ([`aped`]) is the scalar summary used
//! to compare how spread out a set of synthesized traces is.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PwlError {
    #[error("time sequence must start at 0 (got {0})")]
    NonZeroStart(f64),
    #[error("time sequence must be strictly increasing at position {0}")]
    NotIncreasing(usize),
    #[error("time sequence needs at least two points")]
    TooShort,
    #[error("time {0} is negative")]
    NegativeTime(f64),
    #[error("state count {states} does not match time point count {times}")]
    StateCountMismatch { states: usize, times: usize },
    #[error("state at position {0} has wrong dimension")]
    StateDimMismatch(usize),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("step must be positive (got {0})")]
    BadStep(f64),
    #[error("traces disagree in variables or horizon")]
    IncompatibleTraces,
    #[error("need at least two traces, got {0}")]
    TooFewTraces(usize),
    #[error("malformed trace CSV: {0}")]
    BadCsv(String),
}

/// Strictly increasing partition 0 = g_0 < g_1 < ... < g_N = T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSequence {
    points: Vec<f64>,
}

impl TimeSequence {
    pub fn new(points: Vec<f64>) -> Result<Self, PwlError> {
        if points.len() < 2 {
            return Err(PwlError::TooShort);
        }
        if points[0] != 0.0 {
            return Err(PwlError::NonZeroStart(points[0]));
        }
        for i in 1..points.len() {
            if !(points[i] > points[i - 1]) {
                return Err(PwlError::NotIncreasing(i));
            }
        }
        Ok(TimeSequence { points })
    }

    /// Uniform partition of [0, horizon] into `cells` pieces.
    pub fn uniform(cells: usize, horizon: f64) -> Self {
        assert!(cells >= 1 && horizon > 0.0);
        let points = (0..=cells)
            .map(|i| horizon * i as f64 / cells as f64)
            .collect();
        TimeSequence { points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of cells (one less than the number of points).
    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// States attached to a time sequence; the trace is their linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedStateSequence {
    variables: Vec<String>,
    times: TimeSequence,
    states: Vec<Vec<f64>>,
}

impl TimedStateSequence {
    pub fn new(
        variables: Vec<String>,
        times: TimeSequence,
        states: Vec<Vec<f64>>,
    ) -> Result<Self, PwlError> {
        if states.len() != times.points().len() {
            return Err(PwlError::StateCountMismatch {
                states: states.len(),
                times: times.points().len(),
            });
        }
        for (i, s) in states.iter().enumerate() {
            if s.len() != variables.len() {
                return Err(PwlError::StateDimMismatch(i));
            }
        }
        Ok(TimedStateSequence {
            variables,
            times,
            states,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn times(&self) -> &TimeSequence {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn horizon(&self) -> f64 {
        self.times.horizon()
    }

    pub fn var_index(&self, name: &str) -> Result<usize, PwlError> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| PwlError::UnknownVariable(name.to_string()))
    }

    /// Value of the signal at time `t >= 0`: linear interpolation within the
    /// partition, final state held constant beyond the horizon.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>, PwlError> {
        if t < 0.0 {
            return Err(PwlError::NegativeTime(t));
        }
        let pts = self.times.points();
        if t >= self.horizon() {
            return Ok(self.states.last().unwrap().clone());
        }
        // Index of the cell containing t: partition_point gives the first
        // point strictly greater than t.
        let hi = pts.partition_point(|&p| p <= t);
        let (t0, t1) = (pts[hi - 1], pts[hi]);
        let lambda = (t - t0) / (t1 - t0);
        let (s0, s1) = (&self.states[hi - 1], &self.states[hi]);
        Ok(s0
            .iter()
            .zip(s1)
            .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
            .collect())
    }

    /// Samples the signal on the uniform grid {0, step, 2*step, ...} with the
    /// horizon always included as the final sample.
    pub fn resample(&self, step: f64) -> Result<Vec<(f64, Vec<f64>)>, PwlError> {
        let grid = sample_grid(self.horizon(), step)?;
        grid.into_iter()
            .map(|t| Ok((t, self.value_at(t)?)))
            .collect()
    }
}

/// Uniform grid over [0, horizon] with the horizon forced as last point.
pub fn sample_grid(horizon: f64, step: f64) -> Result<Vec<f64>, PwlError> {
    if !(step > 0.0) {
        return Err(PwlError::BadStep(step));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * step;
        if t >= horizon - 1e-12 {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(horizon);
    Ok(grid)
}

/// Average pairwise Euclidean distance: the sum over unordered trace pairs of
/// the integral of the pointwise Euclidean distance over [0, T], computed by
/// trapezoidal quadrature on the shared resample grid.
pub fn aped(signals: &[TimedStateSequence], step: f64) -> Result<f64, PwlError> {
    if signals.len() < 2 {
        return Err(PwlError::TooFewTraces(signals.len()));
    }
    let first = &signals[0];
    for s in &signals[1..] {
        if s.variables() != first.variables()
            || (s.horizon() - first.horizon()).abs() > 1e-9
        {
            return Err(PwlError::IncompatibleTraces);
        }
    }
    let grid = sample_grid(first.horizon(), step)?;
    let sampled: Vec<Vec<Vec<f64>>> = signals
        .iter()
        .map(|s| {
            grid.iter()
                .map(|&t| s.value_at(t))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    for i in 0..signals.len() {
        for j in (i + 1)..signals.len() {
            let dist: Vec<f64> = grid
                .iter()
                .enumerate()
                .map(|(k, _)| euclidean(&sampled[i][k], &sampled[j][k]))
                .collect();
            for k in 1..grid.len() {
                total += 0.5 * (dist[k - 1] + dist[k]) * (grid[k] - grid[k - 1]);
            }
        }
    }
    Ok(total)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-trace metadata written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub benchmark: String,
    pub method: String,
    pub iteration: usize,
    pub seed: u64,
    /// Seed of the random reference valuation; present for the method that
    /// diversifies against one.
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(default)]
    pub reference_seed: Option<u64>,
    pub bound: usize,
    pub delta: f64,
    pub objective: f64,
    pub gammas: Vec<f64>,
    /// Certificate bits per subformula: table index -> bit-string of length N.
    pub valuations: BTreeMap<String, String>,
}

/// A synthesized trace: signal plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub signal: TimedStateSequence,
    pub meta: TraceMeta,
}

impl Trace {
    /// CSV rendering: header `t,<v1>,...`, one row per partition point.
    pub fn to_csv(&self) -> String {
        signal_to_csv(&self.signal)
    }
}

pub fn signal_to_csv(signal: &TimedStateSequence) -> String {
    let mut out = String::from("t");
    for v in signal.variables() {
        out.push(',');
        out.push_str(v);
    }
    out.push('\n');
    for (t, state) in signal.times().points().iter().zip(signal.states()) {
        write!(out, "{t}").unwrap();
        for x in state {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn signal_from_csv(text: &str) -> Result<TimedStateSequence, PwlError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| PwlError::BadCsv("empty file".into()))?;
    let mut cols = header.split(',');
    let t_col = cols.next().unwrap_or("");
    if t_col.trim() != "t" {
        return Err(PwlError::BadCsv(format!(
            "first column must be `t`, got `{t_col}`"
        )));
    }
    let variables: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if variables.is_empty() {
        return Err(PwlError::BadCsv("no variable columns".into()));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let t: f64 = fields
            .next()
            .unwrap()
            .trim()
            .parse()
            .map_err(|e| PwlError::BadCsv(format!("row {}: bad time: {e}", lineno + 2)))?;
        let state: Vec<f64> = fields
            .map(|f| {
                f.trim()
                    .parse()
                    .map_err(|e| PwlError::BadCsv(format!("row {}: bad value: {e}", lineno + 2)))
            })
            .collect::<Result<_, _>>()?;
        if state.len() != variables.len() {
            return Err(PwlError::BadCsv(format!(
                "row {}: expected {} values, got {}",
                lineno + 2,
                variables.len(),
                state.len()
            )));
        }
        times.push(t);
        states.push(state);
    }
    TimedStateSequence::new(variables, TimeSequence::new(times)?, states)
}
