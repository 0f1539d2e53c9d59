//! Brute-force reference solvers for small models, used only by tests.
//!
//! The LP oracle enumerates candidate vertices as solutions of square systems
//! drawn from constraint rows and variable bounds; the mixed oracle wraps it
//! in an exhaustive sweep over all binary assignments. Both require every
//! variable to be boxed, which keeps the feasible set a polytope whose
//! optimum sits on a vertex.

use super::{MilpModel, Sense, VarKind};
use crate::rng::Rng64;

/// Small random mixed model with boxed variables: up to 8 binaries, up to 3
/// continuous variables, up to 5 rows with integer data.
pub(crate) fn random_model(rng: &mut Rng64) -> MilpModel {
    let nb = rng.range_usize(1, 8);
    let nc = rng.range_usize(0, 3);
    let mut m = MilpModel::new();
    let mut ids = Vec::new();
    for j in 0..nb {
        ids.push(m.add_binary(format!("b{j}")));
    }
    for j in 0..nc {
        let lo = -(rng.range_usize(0, 2) as f64);
        let hi = rng.range_usize(1, 4) as f64;
        ids.push(m.add_continuous(format!("x{j}"), lo, hi).unwrap());
    }
    let rows = rng.range_usize(1, 5);
    for r in 0..rows {
        let terms: Vec<(usize, f64)> = ids
            .iter()
            .map(|&id| (id, rng.range_usize(0, 6) as f64 - 3.0))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        if terms.is_empty() {
            continue;
        }
        let sense = match rng.range_usize(0, 5) {
            0 => Sense::Ge,
            1 => Sense::Eq,
            _ => Sense::Le,
        };
        let rhs = rng.range_usize(0, 12) as f64 - 4.0;
        m.add_constraint(format!("r{r}"), terms, sense, rhs).unwrap();
    }
    let obj: Vec<(usize, f64)> = ids
        .iter()
        .map(|&id| (id, rng.range_usize(0, 10) as f64 - 5.0))
        .collect();
    m.set_objective(&obj);
    m
}

/// Maximum objective over the LP relaxation, or None when infeasible.
pub(crate) fn vertex_oracle(model: &MilpModel) -> Option<f64> {
    let n = model.num_vars();
    assert!(n <= 5, "vertex oracle is exponential in the variable count");
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = Vec::new();
    for c in model.constraints() {
        let mut coeffs = vec![0.0; n];
        for &(id, v) in &c.terms {
            coeffs[id] = v;
        }
        rows.push((coeffs, c.sense, c.rhs));
    }
    for (j, v) in model.vars().iter().enumerate() {
        assert!(
            v.lo.is_finite() && v.hi.is_finite(),
            "vertex oracle needs boxed variables"
        );
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        rows.push((unit.clone(), Sense::Le, v.hi));
        rows.push((unit, Sense::Ge, v.lo));
    }
    let feasible = |x: &[f64]| {
        rows.iter().all(|(coeffs, sense, rhs)| {
            let lhs: f64 = coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            match sense {
                Sense::Le => lhs <= rhs + 1e-7,
                Sense::Ge => lhs >= rhs - 1e-7,
                Sense::Eq => (lhs - rhs).abs() <= 1e-7,
            }
        })
    };

    let mut best: Option<f64> = None;
    let k = rows.len();
    let mut active = vec![0usize; n];
    enumerate_subsets(k, n, 0, 0, &mut active, &mut |active| {
        if let Some(x) = solve_square(&rows, active, n) {
            if feasible(&x) {
                let obj = model.eval_objective(&x);
                best = Some(best.map_or(obj, |b: f64| b.max(obj)));
            }
        }
    });
    best
}

/// Maximum objective over binary assignments x LP vertices, or None when
/// infeasible. Each assignment is substituted out, leaving a small purely
/// continuous model for the vertex oracle. Statuses beyond
/// feasible/infeasible cannot occur on boxed models.
pub(crate) fn milp_oracle(model: &MilpModel) -> Option<f64> {
    let binaries: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();
    let continuous: Vec<usize> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Continuous)
        .map(|(i, _)| i)
        .collect();
    assert!(binaries.len() <= 12, "oracle is exponential in binaries");
    let mut reduced_id = vec![usize::MAX; model.num_vars()];
    for (k, &c) in continuous.iter().enumerate() {
        reduced_id[c] = k;
    }

    let mut best: Option<f64> = None;
    'assignment: for mask in 0u32..(1u32 << binaries.len()) {
        let value_of = |b: usize| -> f64 {
            let pos = binaries.iter().position(|&x| x == b).unwrap();
            ((mask >> pos) & 1) as f64
        };
        // Respect bounds that pre-fix some binaries.
        for &b in &binaries {
            let v = value_of(b);
            if v < model.var(b).lo - 1e-9 || v > model.var(b).hi + 1e-9 {
                continue 'assignment;
            }
        }
        let mut reduced = MilpModel::new();
        for &c in &continuous {
            let v = model.var(c);
            reduced
                .add_var(v.name.clone(), VarKind::Continuous, v.lo, v.hi)
                .unwrap();
        }
        for con in model.constraints() {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            let mut shift = 0.0;
            for &(id, coef) in &con.terms {
                if reduced_id[id] == usize::MAX {
                    shift += coef * value_of(id);
                } else {
                    terms.push((reduced_id[id], coef));
                }
            }
            let rhs = con.rhs - shift;
            if terms.is_empty() {
                let ok = match con.sense {
                    Sense::Le => 0.0 <= rhs + 1e-9,
                    Sense::Ge => 0.0 >= rhs - 1e-9,
                    Sense::Eq => rhs.abs() <= 1e-9,
                };
                if !ok {
                    continue 'assignment;
                }
                continue;
            }
            reduced
                .add_constraint(con.name.clone(), terms, con.sense, rhs)
                .unwrap();
        }
        let mut fixed_part = model.objective_offset();
        let mut obj: Vec<(usize, f64)> = Vec::new();
        for (id, &c) in model.objective().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if reduced_id[id] == usize::MAX {
                fixed_part += c * value_of(id);
            } else {
                obj.push((reduced_id[id], c));
            }
        }
        reduced.set_objective(&obj);
        reduced.set_objective_offset(fixed_part);
        let candidate = if continuous.is_empty() {
            Some(fixed_part)
        } else {
            vertex_oracle(&reduced)
        };
        if let Some(obj) = candidate {
            best = Some(best.map_or(obj, |b: f64| b.max(obj)));
        }
    }
    best
}

fn enumerate_subsets(
    k: usize,
    n: usize,
    start: usize,
    depth: usize,
    pick: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == n {
        f(pick);
        return;
    }
    for i in start..k {
        pick[depth] = i;
        enumerate_subsets(k, n, i + 1, depth + 1, pick, f);
    }
}

/// Solves the selected rows as equalities; None when singular.
fn solve_square(rows: &[(Vec<f64>, Sense, f64)], active: &[usize], n: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| {
            let mut r = rows[i].0.clone();
            r.push(rows[i].2);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        let inv = 1.0 / a[col][col];
        for v in a[col].iter_mut() {
            *v *= inv;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c2 in 0..=n {
                        let sub = f * a[col][c2];
                        a[r][c2] -= sub;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n]).collect())
}
