//! Branch-and-bound over binary variables.
//!
//! Most-fractional branching with ties broken by lowest variable index;
//! best-bound node selection with ties broken by node creation order. A
//! round-up heuristic seeds the incumbent at the root, which prunes most of
//! the tree on investment problems where the LP relaxation is nearly
//! integral.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::lp::LpProblem;

use super::simplex::{CompForm, RawStatus, Simplex};
use super::{SolveResult, SolveStats, SolveStatus, SolverConfig, SolverError};

/// Integrality tolerance for branching decisions.
const INT_TOL: f64 = 1e-7;

struct Node {
    id: u64,
    /// LP bound inherited from the parent (-inf at the root).
    bound: f64,
    /// Bound overrides (var, lb, ub) accumulated along the path.
    overrides: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse to pop the lowest bound first,
        // then the oldest node.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub(super) fn solve(p: &LpProblem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let form = CompForm::from_problem(p);
    let int_vars: Vec<usize> = p
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.integer)
        .map(|(j, _)| j)
        .collect();

    let mut iterations: u64 = 0;
    let mut factorizations: u64 = 0;
    let mut nodes_solved: u64 = 0;
    let mut next_id: u64 = 1;

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    heap.push(Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        overrides: Vec::new(),
    });

    let gap_slack = |inc: f64| cfg.milp_gap_tol * inc.abs().max(1.0);

    let mut global_bound = f64::NEG_INFINITY;
    let mut ran_heuristic = false;
    let mut unbounded = false;

    while let Some(node) = heap.pop() {
        // Best-bound order: the popped node carries the global bound.
        global_bound = node.bound;
        if let Some((_, inc_obj)) = &incumbent {
            // Once the top of the heap cannot improve the incumbent beyond
            // the gap, nothing below it can either.
            if node.bound >= *inc_obj - gap_slack(*inc_obj) {
                break;
            }
        }
        if nodes_solved >= cfg.max_nodes {
            // Re-push so the certified bound reflects this node too.
            heap.push(node);
            global_bound = heap.peek().map_or(global_bound, |n| n.bound);
            return Ok(finish(
                p,
                SolveStatus::IterationLimit,
                incumbent,
                global_bound,
                iterations,
                factorizations,
                nodes_solved,
                start,
            ));
        }

        nodes_solved += 1;
        let raw = Simplex::new(&form, cfg, &node.overrides).solve(cfg)?;
        iterations += raw.iterations;
        factorizations += raw.factorizations;
        match raw.status {
            RawStatus::Infeasible => continue,
            RawStatus::Unbounded => {
                unbounded = true;
                break;
            }
            RawStatus::IterationLimit => {
                return Err(SolverError::Numerical(
                    "simplex iteration limit hit inside branch-and-bound".into(),
                ))
            }
            RawStatus::Optimal => {}
        }
        let node_obj = raw.obj + p.obj_offset();
        if let Some((_, inc_obj)) = &incumbent {
            if node_obj >= *inc_obj - gap_slack(*inc_obj) {
                continue;
            }
        }

        // Most fractional binary, ties by lowest index.
        let mut branch_var: Option<(usize, f64)> = None;
        for &j in &int_vars {
            let v = raw.x[j];
            let frac = (v - v.round()).abs();
            if frac > INT_TOL {
                let dist = (v - v.floor() - 0.5).abs();
                match branch_var {
                    Some((_, best)) if best <= dist => {}
                    _ => branch_var = Some((j, dist)),
                }
            }
        }

        match branch_var {
            None => {
                // Integral solution: candidate incumbent.
                let better = incumbent
                    .as_ref()
                    .map_or(true, |(_, inc_obj)| node_obj < *inc_obj);
                if better {
                    incumbent = Some((raw.x.clone(), node_obj));
                }
            }
            Some((j, _)) => {
                if !ran_heuristic {
                    // Root heuristic: round every fractional binary up (any
                    // usage implies investment) and solve the resulting LP.
                    ran_heuristic = true;
                    let mut fixed = node.overrides.clone();
                    for &jj in &int_vars {
                        let b = if raw.x[jj] > INT_TOL { 1.0 } else { 0.0 };
                        fixed.push((jj, b, b));
                    }
                    let h = Simplex::new(&form, cfg, &fixed).solve(cfg)?;
                    iterations += h.iterations;
                    factorizations += h.factorizations;
                    if h.status == RawStatus::Optimal {
                        let h_obj = h.obj + p.obj_offset();
                        let better = incumbent
                            .as_ref()
                            .map_or(true, |(_, inc_obj)| h_obj < *inc_obj);
                        if better {
                            incumbent = Some((h.x, h_obj));
                        }
                    }
                }
                for &(lo, hi) in &[(0.0, 0.0), (1.0, 1.0)] {
                    let mut ov = node.overrides.clone();
                    ov.push((j, lo, hi));
                    heap.push(Node {
                        id: next_id,
                        bound: node_obj,
                        overrides: ov,
                    });
                    next_id += 1;
                }
            }
        }
    }

    if unbounded {
        return Ok(finish(
            p,
            SolveStatus::Unbounded,
            None,
            f64::NEG_INFINITY,
            iterations,
            factorizations,
            nodes_solved,
            start,
        ));
    }

    match incumbent {
        Some((x, obj)) => {
            // Heap exhausted: the incumbent is exactly optimal. Gap break:
            // the last popped bound certifies the remaining slack.
            let bound = if heap.is_empty() {
                obj
            } else {
                global_bound.min(obj)
            };
            Ok(finish(
                p,
                SolveStatus::Optimal,
                Some((x, obj)),
                bound,
                iterations,
                factorizations,
                nodes_solved,
                start,
            ))
        }
        None => Ok(finish(
            p,
            SolveStatus::Infeasible,
            None,
            f64::INFINITY,
            iterations,
            factorizations,
            nodes_solved,
            start,
        )),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    p: &LpProblem,
    status: SolveStatus,
    incumbent: Option<(Vec<f64>, f64)>,
    bound: f64,
    iterations: u64,
    factorizations: u64,
    nodes: u64,
    start: Instant,
) -> SolveResult {
    let mut primal = std::collections::BTreeMap::new();
    let objective = match &incumbent {
        Some((x, obj)) => {
            for (j, v) in p.variables().iter().enumerate() {
                primal.insert(v.name.clone(), x[j]);
            }
            *obj
        }
        None => match status {
            SolveStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        },
    };
    SolveResult {
        status,
        objective,
        primal,
        duals: None,
        bound,
        stats: SolveStats {
            simplex_iterations: iterations,
            nodes,
            factorizations,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    }
}
