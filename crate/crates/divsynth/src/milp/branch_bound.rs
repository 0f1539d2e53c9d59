//! Branch and bound over the binary variables.
//!
//! Nodes are explored best-bound first (ties broken by creation order, so
//! runs are deterministic); branching picks the most fractional binary. Each
//! node stores only its bound patches; the single shared tableau is re-solved
//! warm because bound changes never invalidate the basis factorization. A
//! rounding heuristic fixes every binary at its rounded relaxation value and
//! re-solves, which often produces early incumbents on loosely coupled
//! models. Incumbents are accepted only after re-checking the original rows,
//! so tableau drift cannot smuggle in an infeasible answer.

use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use super::simplex::{LpStatus, Tableau};
use super::{MilpModel, Solution, SolveParams, Status, VarId, VarKind};

/// Bound override chain; child nodes extend their parent's chain.
struct Patch {
    parent: Option<Rc<Patch>>,
    var: VarId,
    lo: f64,
    hi: f64,
}

fn patched_bounds(
    base_lo: &[f64],
    base_hi: &[f64],
    patch: &Option<Rc<Patch>>,
) -> (Vec<f64>, Vec<f64>) {
    let mut lo = base_lo.to_vec();
    let mut hi = base_hi.to_vec();
    let mut cur = patch.as_ref();
    while let Some(p) = cur {
        // Nearest patch wins; earlier (deeper) links must not overwrite it.
        if lo[p.var] == base_lo[p.var] && hi[p.var] == base_hi[p.var] {
            lo[p.var] = p.lo;
            hi[p.var] = p.hi;
        }
        cur = p.parent.as_ref();
    }
    (lo, hi)
}

struct Node {
    id: usize,
    bound: f64,
    patch: Option<Rc<Patch>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: higher bound first, then older node.
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    tableau: Tableau,
    binaries: Vec<VarId>,
    incumbent: Option<(f64, Vec<f64>)>,
    history: Vec<f64>,
}

impl Search<'_> {
    fn incumbent_obj(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(z, _)| *z)
    }

    /// Snaps binaries to integers, re-checks the model, and keeps the result
    /// if it beats the incumbent.
    fn offer_incumbent(&mut self, values: &[f64]) {
        let mut snapped = values.to_vec();
        for &b in &self.binaries {
            snapped[b] = snapped[b].round();
        }
        if !self.model.check_solution(&snapped, 1e-5).is_empty() {
            return;
        }
        let z = self.model.eval_objective(&snapped);
        if self.incumbent_obj().is_none_or(|inc| z > inc) {
            self.incumbent = Some((z, snapped));
            self.history.push(z);
        }
    }

    /// Fixes every binary at its rounded relaxation value and re-solves the
    /// remaining continuous problem.
    fn rounding_heuristic(&mut self, lo: &[f64], hi: &[f64], relax: &[f64]) {
        let mut rlo = lo.to_vec();
        let mut rhi = hi.to_vec();
        for &b in &self.binaries {
            let v = relax[b].round().clamp(lo[b], hi[b]);
            rlo[b] = v;
            rhi[b] = v;
        }
        let res = self.tableau.solve_with_bounds(&rlo, &rhi);
        if res.status == LpStatus::Optimal {
            self.offer_incumbent(&res.values);
        }
    }
}

/// Maximizes the model. Deterministic for a fixed model as long as no time
/// limit interrupts the search.
pub fn solve(model: &MilpModel, params: &SolveParams) -> Solution {
    let start = Instant::now();
    let base_lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
    let base_hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();
    let binaries: Vec<VarId> = model
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();

    let mut search = Search {
        model,
        tableau: Tableau::new(model),
        binaries,
        incumbent: None,
        history: Vec::new(),
    };

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: f64::INFINITY,
        patch: None,
    });
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut stopped_early = false;
    let mut unbounded = false;
    let mut remaining_bound = f64::NEG_INFINITY;

    while let Some(node) = heap.pop() {
        if let Some(inc) = search.incumbent_obj() {
            // Best-bound order: once the top cannot beat the incumbent by
            // more than the gap, nothing can.
            if node.bound <= inc + params.gap_tol {
                break;
            }
        }
        let out_of_budget = params
            .time_limit
            .is_some_and(|l| start.elapsed() >= l)
            || params.node_limit.is_some_and(|l| nodes >= l);
        if out_of_budget {
            stopped_early = true;
            remaining_bound = node.bound;
            break;
        }
        nodes += 1;

        let (lo, hi) = patched_bounds(&base_lo, &base_hi, &node.patch);
        let res = search.tableau.solve_with_bounds(&lo, &hi);
        match res.status {
            LpStatus::Infeasible => {
                if std::env::var_os("DIVSYNTH_DEBUG_COLD").is_some() {
                    let cold = Tableau::new(model).solve_with_bounds(&lo, &hi);
                    if cold.status != LpStatus::Infeasible {
                        let (unit_err, xb_err) = search.tableau.drift_report();
                        eprintln!(
                            "node {}: warm says infeasible, cold says {:?}; unit_err={unit_err:.3e} xb_err={xb_err:.3e}",
                            node.id, cold.status
                        );
                    }
                }
                continue;
            }
            LpStatus::Unbounded => {
                unbounded = true;
                break;
            }
            LpStatus::IterationLimit => {
                // Could not bound this node; split it anyway on the first
                // unfixed binary so descendants stay solvable.
                if let Some(&b) = search.binaries.iter().find(|&&b| hi[b] - lo[b] > 0.5) {
                    for (clo, chi) in [(0.0, 0.0), (1.0, 1.0)] {
                        heap.push(Node {
                            id: next_id,
                            bound: node.bound,
                            patch: Some(Rc::new(Patch {
                                parent: node.patch.clone(),
                                var: b,
                                lo: clo,
                                hi: chi,
                            })),
                        });
                        next_id += 1;
                    }
                }
                continue;
            }
            LpStatus::Optimal => {}
        }
        let bound = res.objective;
        if search
            .incumbent_obj()
            .is_some_and(|inc| bound <= inc + params.gap_tol)
        {
            continue;
        }

        let fractional: Vec<VarId> = search
            .binaries
            .iter()
            .copied()
            .filter(|&b| (res.values[b] - res.values[b].round()).abs() > params.int_tol)
            .collect();
        if fractional.is_empty() {
            search.offer_incumbent(&res.values);
            continue;
        }
        if node.id == 0 || fractional.len() <= 8 {
            search.rounding_heuristic(&lo, &hi, &res.values);
            if search
                .incumbent_obj()
                .is_some_and(|inc| bound <= inc + params.gap_tol)
            {
                continue;
            }
        }

        // Most fractional binary; ties fall to the lowest id.
        let branch_var = fractional
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let fa = (res.values[a] - 0.5).abs();
                let fb = (res.values[b] - 0.5).abs();
                fa.total_cmp(&fb).then(a.cmp(&b))
            })
            .expect("nonempty fractional set");
        for (clo, chi) in [(0.0, 0.0), (1.0, 1.0)] {
            heap.push(Node {
                id: next_id,
                bound,
                patch: Some(Rc::new(Patch {
                    parent: node.patch.clone(),
                    var: branch_var,
                    lo: clo,
                    hi: chi,
                })),
            });
            next_id += 1;
        }
    }

    if unbounded {
        return Solution {
            status: Status::Unbounded,
            values: None,
            objective: f64::NAN,
            best_bound: f64::INFINITY,
            nodes,
            incumbent_history: Vec::new(),
        };
    }
    let best_bound = match (search.incumbent_obj(), stopped_early) {
        (Some(inc), false) => inc,
        (Some(inc), true) => remaining_bound.max(inc),
        (None, false) => f64::NEG_INFINITY,
        (None, true) => remaining_bound,
    };
    let status = match (&search.incumbent, stopped_early) {
        (Some(_), false) => Status::Optimal,
        (Some(_), true) => Status::Feasible,
        (None, false) => Status::Infeasible,
        (None, true) => Status::Timeout,
    };
    let (objective, values) = match search.incumbent {
        Some((z, v)) => (z, Some(v)),
        None => (f64::NAN, None),
    };
    Solution {
        status,
        values,
        objective,
        best_bound,
        nodes,
        incumbent_history: search.history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::test_oracle::{milp_oracle, random_model};
    use crate::milp::Sense;
    use crate::rng::Rng64;
    use std::time::Duration;

    fn solve_default(model: &MilpModel) -> Solution {
        solve(model, &SolveParams::default())
    }

    #[test]
    fn knapsack_picks_the_best_subset() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        let c = m.add_binary("c");
        m.add_constraint("w", vec![(a, 2.0), (b, 3.0), (c, 1.0)], Sense::Le, 3.0)
            .unwrap();
        m.set_objective(&[(a, 5.0), (b, 4.0), (c, 3.0)]);
        let s = solve_default(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 8.0).abs() < 1e-9);
        let v = s.values.unwrap();
        assert_eq!((v[a].round(), v[b].round(), v[c].round()), (1.0, 0.0, 1.0));
    }

    #[test]
    fn pure_lp_needs_no_branching() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 4.0).unwrap();
        m.set_objective(&[(x, 2.0)]);
        m.set_objective_offset(1.0);
        let s = solve_default(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - 9.0).abs() < 1e-9);
        assert_eq!(s.nodes, 1);
    }

    #[test]
    fn infeasible_binary_model() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("r", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 3.0)
            .unwrap();
        m.set_objective(&[(a, 1.0)]);
        let s = solve_default(&m);
        assert_eq!(s.status, Status::Infeasible);
        assert!(s.values.is_none());
    }

    #[test]
    fn unbounded_model() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let b = m.add_binary("b");
        m.add_constraint("r", vec![(x, 1.0), (b, -1.0)], Sense::Ge, 0.0)
            .unwrap();
        m.set_objective(&[(x, 1.0)]);
        assert_eq!(solve_default(&m).status, Status::Unbounded);
    }

    #[test]
    fn zero_time_limit_times_out_without_incumbent() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a");
        m.set_objective(&[(a, 1.0)]);
        let s = solve(
            &m,
            &SolveParams {
                time_limit: Some(Duration::ZERO),
                ..SolveParams::default()
            },
        );
        assert_eq!(s.status, Status::Timeout);
        assert_eq!(s.nodes, 0);
        assert!(s.values.is_none());
    }

    #[test]
    fn binaries_fixed_through_bounds_are_respected() {
        let mut m = MilpModel::new();
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.fix_var(a, 1.0).unwrap();
        m.set_objective(&[(a, -1.0), (b, -1.0)]);
        let s = solve_default(&m);
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-9);
        assert_eq!(s.values.unwrap()[a], 1.0);
    }

    #[test]
    fn incumbent_history_is_nondecreasing() {
        // Maximize a sum of binaries under a weak row; multiple incumbents
        // appear as the tree tightens.
        let mut rng = Rng64::new(7);
        for _ in 0..20 {
            let m = random_model(&mut rng);
            let s = solve_default(&m);
            for w in s.incumbent_history.windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "history regressed: {w:?}");
            }
        }
    }

    #[test]
    fn deterministic_across_repeat_solves() {
        let mut rng = Rng64::new(99);
        for _ in 0..10 {
            let m = random_model(&mut rng);
            let s1 = solve_default(&m);
            let s2 = solve_default(&m);
            assert_eq!(s1.status, s2.status);
            assert_eq!(s1.nodes, s2.nodes);
            assert_eq!(s1.incumbent_history, s2.incumbent_history);
            match (s1.values, s2.values) {
                (Some(a), Some(b)) => assert_eq!(a, b),
                (None, None) => {}
                other => panic!("value presence differs: {other:?}"),
            }
        }
    }

    #[test]
    fn random_milps_match_exhaustive_oracle() {
        let mut rng = Rng64::new(0xBB0201);
        let mut feasible_count = 0;
        for case in 0..500 {
            let m = random_model(&mut rng);
            let got = solve_default(&m);
            let want = milp_oracle(&m);
            match want {
                None => {
                    assert_eq!(
                        got.status,
                        Status::Infeasible,
                        "case {case}: oracle infeasible, search said {:?}",
                        got.status
                    );
                }
                Some(w) => {
                    assert_eq!(got.status, Status::Optimal, "case {case}");
                    assert!(
                        (got.objective - w).abs() <= 1e-6 * (1.0 + w.abs()),
                        "case {case}: search {} oracle {w}",
                        got.objective
                    );
                    let v = got.values.unwrap();
                    assert!(
                        m.check_solution(&v, 1e-6).is_empty(),
                        "case {case}: infeasible incumbent returned"
                    );
                    feasible_count += 1;
                }
            }
        }
        assert!(feasible_count > 200, "want many feasible cases, got {feasible_count}");
    }
}
