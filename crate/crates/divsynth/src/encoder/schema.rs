//! JSON problem descriptions: a system model, a formula, and encoding
//! defaults, as read by the command-line tool and shipped under
//! `benchmarks/`.
//!
//! ```json
//! {
//!   "name": "toy",
//!   "horizon": 10.0,
//!   "vars": [
//!     { "name": "x", "range": [0.0, 40.0], "init": [0.0, 0.0] },
//!     { "name": "a", "range": [-3.0, 3.0] }
//!   ],
//!   "blocks": [
//!     { "kind": "pwc_input", "var": "a" },
//!     { "kind": "integrator", "state": "x", "rate": "a" }
//!   ],
//!   "formula": "Ev(Alw[0,5](x <= 10))",
//!   "defaults": { "cells": 10, "delta": 0.01 }
//! }
//! ```
//!
//! Invariant bounds in automaton locations may be `null` for "unbounded on
//! that side". Flow bounds must be finite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DynamicsBlock, EncodeError, EncodingConfig, Location, SystemModel, VarDef};
use crate::stl::{parse, Formula, ParseError};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid formula: {0}")]
    Formula(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] EncodeError),
}

/// A fully parsed problem: validated model, formula in negation normal
/// form, and the encoding defaults the file requested.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub model: SystemModel,
    pub formula_text: String,
    pub formula: Formula,
    pub defaults: EncodingConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    name: String,
    horizon: f64,
    vars: Vec<RawVar>,
    #[serde(default)]
    blocks: Vec<RawBlock>,
    formula: String,
    #[serde(default)]
    defaults: RawDefaults,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVar {
    name: String,
    range: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init: Option<(f64, f64)>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawBlock {
    PwcInput {
        var: String,
    },
    Integrator {
        state: String,
        rate: String,
    },
    DoubleIntegrator {
        pos: String,
        vel: String,
        acc: String,
    },
    Automaton {
        vars: Vec<String>,
        locations: Vec<RawLocation>,
        initial: Vec<usize>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLocation {
    name: String,
    flow: Vec<(f64, f64)>,
    invariant: Vec<(Option<f64>, Option<f64>)>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDefaults {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_resolution: Option<usize>,
}

/// Parses, validates, and normalizes a problem description.
pub fn from_json_str(text: &str) -> Result<ProblemSpec, SchemaError> {
    let raw: RawProblem = serde_json::from_str(text)?;
    let vars: Vec<VarDef> = raw
        .vars
        .into_iter()
        .map(|v| {
            let mut d = VarDef::new(v.name, v.range.0, v.range.1);
            if let Some((lo, hi)) = v.init {
                d = d.with_init(lo, hi);
            }
            d
        })
        .collect();
    let blocks: Vec<DynamicsBlock> = raw
        .blocks
        .into_iter()
        .map(|b| match b {
            RawBlock::PwcInput { var } => DynamicsBlock::PiecewiseConstantInput { var },
            RawBlock::Integrator { state, rate } => {
                DynamicsBlock::IntegratorLink { state, rate }
            }
            RawBlock::DoubleIntegrator { pos, vel, acc } => {
                DynamicsBlock::DoubleIntegrator { pos, vel, acc }
            }
            RawBlock::Automaton {
                vars,
                locations,
                initial,
            } => DynamicsBlock::RectangularAutomaton {
                vars,
                locations: locations
                    .into_iter()
                    .map(|l| Location {
                        name: l.name,
                        flow: l.flow,
                        invariant: l
                            .invariant
                            .into_iter()
                            .map(|(lo, hi)| {
                                (
                                    lo.unwrap_or(f64::NEG_INFINITY),
                                    hi.unwrap_or(f64::INFINITY),
                                )
                            })
                            .collect(),
                    })
                    .collect(),
                initial,
            },
        })
        .collect();
    let model = SystemModel {
        name: raw.name,
        horizon: raw.horizon,
        vars,
        blocks,
    };
    model.validate()?;
    let names = model.var_names();
    let formula = parse(&raw.formula, &names)?;
    let base = EncodingConfig::default();
    let defaults = EncodingConfig {
        cells: raw.defaults.cells.unwrap_or(base.cells),
        delta: raw.defaults.delta.unwrap_or(base.delta),
        time_resolution: raw
            .defaults
            .time_resolution
            .unwrap_or(base.time_resolution),
    };
    defaults.validate()?;
    Ok(ProblemSpec {
        model,
        formula_text: raw.formula,
        formula,
        defaults,
    })
}

/// Serializes a model, formula text, and defaults back to the JSON layout
/// accepted by [`from_json_str`].
pub fn to_json_string(
    model: &SystemModel,
    formula_text: &str,
    defaults: &EncodingConfig,
) -> String {
    let raw = RawProblem {
        name: model.name.clone(),
        horizon: model.horizon,
        vars: model
            .vars
            .iter()
            .map(|v| RawVar {
                name: v.name.clone(),
                range: (v.lo, v.hi),
                init: if v.init_lo == v.lo && v.init_hi == v.hi {
                    None
                } else {
                    Some((v.init_lo, v.init_hi))
                },
            })
            .collect(),
        blocks: model
            .blocks
            .iter()
            .map(|b| match b {
                DynamicsBlock::PiecewiseConstantInput { var } => {
                    RawBlock::PwcInput { var: var.clone() }
                }
                DynamicsBlock::IntegratorLink { state, rate } => RawBlock::Integrator {
                    state: state.clone(),
                    rate: rate.clone(),
                },
                DynamicsBlock::DoubleIntegrator { pos, vel, acc } => {
                    RawBlock::DoubleIntegrator {
                        pos: pos.clone(),
                        vel: vel.clone(),
                        acc: acc.clone(),
                    }
                }
                DynamicsBlock::RectangularAutomaton {
                    vars,
                    locations,
                    initial,
                } => RawBlock::Automaton {
                    vars: vars.clone(),
                    locations: locations
                        .iter()
                        .map(|l| RawLocation {
                            name: l.name.clone(),
                            flow: l.flow.clone(),
                            invariant: l
                                .invariant
                                .iter()
                                .map(|&(lo, hi)| {
                                    (
                                        lo.is_finite().then_some(lo),
                                        hi.is_finite().then_some(hi),
                                    )
                                })
                                .collect(),
                        })
                        .collect(),
                    initial: initial.clone(),
                },
            })
            .collect(),
        formula: formula_text.to_string(),
        defaults: RawDefaults {
            cells: Some(defaults.cells),
            delta: Some(defaults.delta),
            time_resolution: Some(defaults.time_resolution),
        },
    };
    serde_json::to_string_pretty(&raw).expect("problem specs serialize")
}
