//! LP and MILP solving behind a backend-agnostic interface.
//!
//! LPs are solved by a bounded-variable revised simplex that reports dual
//! values on tagged rows; MILPs by branch-and-bound over the binary
//! investment variables (most-fractional branching, best-bound node
//! selection, deterministic tie-breaking by lowest index).

mod branch_bound;
mod lu;
mod mps;
mod simplex;

pub use mps::{export_mps, import_mps, MpsError};

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::LpProblem;
use simplex::{CompForm, RawStatus, Simplex};

/// Solve outcome. Infeasible/unbounded are ordinary returns, not errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Iteration counters and wall time of a solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub simplex_iterations: u64,
    pub nodes: u64,
    pub factorizations: u64,
    pub wall_seconds: f64,
}

/// Primal/dual solution of an LP or MILP solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective value (incumbent objective for MILP node-limit returns).
    pub objective: f64,
    /// Variable name -> value.
    pub primal: BTreeMap<String, f64>,
    /// Row tag -> dual value; present iff the problem had no integrality
    /// flags.
    pub duals: Option<BTreeMap<String, f64>>,
    /// Certified lower bound on the optimal objective. Equals `objective`
    /// at optimal status; for MILP node-limit returns it is the global
    /// branch-and-bound bound.
    pub bound: f64,
    pub stats: SolveStats,
}

impl SolveResult {
    /// Value of a variable by name.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.primal.get(name).copied()
    }

    /// Dual of a row by tag (LP solves only).
    pub fn dual(&self, tag: &str) -> Option<f64> {
        self.duals.as_ref().and_then(|d| d.get(tag).copied())
    }
}

/// Solver tolerances and limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute feasibility tolerance on bounds and rows.
    pub feasibility_tol: f64,
    /// Relative optimality (reduced-cost) tolerance.
    pub optimality_tol: f64,
    /// Relative MILP gap at which branch-and-bound stops.
    pub milp_gap_tol: f64,
    /// Simplex iteration limit per LP solve.
    pub max_iterations: u64,
    /// Branch-and-bound node limit.
    pub max_nodes: u64,
    /// Consecutive degenerate pivots before Bland's rule engages.
    pub stall_iterations: u64,
    /// Reserved for randomized strategies; the current backend is
    /// deterministic and ignores it.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            feasibility_tol: 1e-7,
            optimality_tol: 1e-9,
            milp_gap_tol: 1e-6,
            max_iterations: 2_000_000,
            max_nodes: 200_000,
            stall_iterations: 100,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.feasibility_tol > 0.0 && self.optimality_tol > 0.0 && self.milp_gap_tol > 0.0) {
            return Err(SolverError::BadConfig(
                "tolerances must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Structural solver failures (statuses are returns, not errors).
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solve_lp requires a problem without integrality flags")]
    IntegralityPresent,
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Solve a pure LP, reporting duals on every row.
pub fn solve_lp(p: &LpProblem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    if p.is_mip() {
        return Err(SolverError::IntegralityPresent);
    }
    let start = Instant::now();
    let form = CompForm::from_problem(p);
    let raw = Simplex::new(&form, cfg, &[]).solve(cfg)?;
    Ok(assemble_lp_result(p, raw, start))
}

/// Solve a MILP by branch-and-bound over its binary variables.
pub fn solve_milp(p: &LpProblem, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    if !p.is_mip() {
        return solve_lp(p, cfg);
    }
    branch_bound::solve(p, cfg)
}

fn assemble_lp_result(
    p: &LpProblem,
    raw: simplex::RawSolution,
    start: Instant,
) -> SolveResult {
    let status = match raw.status {
        RawStatus::Optimal => SolveStatus::Optimal,
        RawStatus::Infeasible => SolveStatus::Infeasible,
        RawStatus::Unbounded => SolveStatus::Unbounded,
        RawStatus::IterationLimit => SolveStatus::IterationLimit,
    };
    let objective = match status {
        SolveStatus::Optimal | SolveStatus::IterationLimit => raw.obj + p.obj_offset(),
        SolveStatus::Infeasible => f64::INFINITY,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
    };
    let bound = match status {
        SolveStatus::Optimal => objective,
        SolveStatus::Infeasible => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };
    let mut primal = BTreeMap::new();
    for (j, v) in p.variables().iter().enumerate() {
        primal.insert(v.name.clone(), raw.x[j]);
    }
    let duals = if status == SolveStatus::Optimal {
        let mut d = BTreeMap::new();
        for (i, c) in p.constraints().iter().enumerate() {
            d.insert(c.tag.clone(), raw.y[i]);
        }
        Some(d)
    } else {
        None
    };
    SolveResult {
        status,
        objective,
        primal,
        duals,
        bound,
        stats: SolveStats {
            simplex_iterations: raw.iterations,
            nodes: 0,
            factorizations: raw.factorizations,
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{Constraint, Sense, Variable};

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn simple_bounded_lp_with_dual() {
        // min -x - y  s.t.  x + y <= 1.5, 0 <= x,y <= 1
        let p = LpProblem::new(
            vec![
                Variable::new("x", 0.0, 1.0, -1.0),
                Variable::new("y", 0.0, 1.0, -1.0),
            ],
            vec![Constraint::new(
                "cap",
                vec![(0, 1.0), (1, 1.0)],
                Sense::Le,
                1.5,
            )],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 1.5).abs() < 1e-9);
        // Relaxing the cap by one unit lowers the objective by one.
        assert!((r.dual("cap").unwrap() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn marginal_price_follows_the_marginal_unit() {
        // min 50 p + 1e5 e  s.t.  p + e = 1, 0 <= p <= cap, e >= 0.
        let build = |cap: f64| {
            LpProblem::new(
                vec![
                    Variable::new("p", 0.0, cap, 50.0),
                    Variable::new("e", 0.0, f64::INFINITY, 1e5),
                ],
                vec![Constraint::new(
                    "balance",
                    vec![(0, 1.0), (1, 1.0)],
                    Sense::Eq,
                    1.0,
                )],
            )
            .unwrap()
        };
        let ample = solve_lp(&build(10.0), &cfg()).unwrap();
        assert_eq!(ample.status, SolveStatus::Optimal);
        assert!((ample.objective - 50.0).abs() < 1e-9);
        assert!((ample.dual("balance").unwrap() - 50.0).abs() < 1e-9);

        let scarce = solve_lp(&build(0.4), &cfg()).unwrap();
        assert!((scarce.objective - (50.0 * 0.4 + 1e5 * 0.6)).abs() < 1e-6);
        assert!((scarce.dual("balance").unwrap() - 1e5).abs() < 1e-6);
    }

    #[test]
    fn empty_objective_is_trivially_optimal() {
        let p = LpProblem::new(
            vec![Variable::new("x", 0.0, 3.0, 0.0)],
            vec![],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn detects_infeasible() {
        // x >= 0 (bound) but row forces x <= -1.
        let p = LpProblem::new(
            vec![Variable::new("x", 0.0, f64::INFINITY, 1.0)],
            vec![Constraint::new("r", vec![(0, 1.0)], Sense::Le, -1.0)],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let p = LpProblem::new(
            vec![Variable::new("x", 0.0, f64::INFINITY, -1.0)],
            vec![],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_variable_and_ge_row() {
        // min x  s.t.  x >= -5, x free.
        let p = LpProblem::new(
            vec![Variable::new("x", f64::NEG_INFINITY, f64::INFINITY, 1.0)],
            vec![Constraint::new("floor", vec![(0, 1.0)], Sense::Ge, -5.0)],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 5.0).abs() < 1e-9);
        assert!((r.dual("floor").unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_system_needs_phase_one() {
        // min x + y  s.t.  x + y = 10, x - y = 2  ->  x=6, y=4.
        let p = LpProblem::new(
            vec![
                Variable::new("x", 0.0, f64::INFINITY, 1.0),
                Variable::new("y", 0.0, f64::INFINITY, 1.0),
            ],
            vec![
                Constraint::new("sum", vec![(0, 1.0), (1, 1.0)], Sense::Eq, 10.0),
                Constraint::new("diff", vec![(0, 1.0), (1, -1.0)], Sense::Eq, 2.0),
            ],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value("x").unwrap() - 6.0).abs() < 1e-9);
        assert!((r.value("y").unwrap() - 4.0).abs() < 1e-9);
        assert!((r.objective - 10.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_mip_in_solve_lp() {
        let p = LpProblem::new(vec![Variable::binary("b", 1.0)], vec![]).unwrap();
        assert!(matches!(
            solve_lp(&p, &cfg()),
            Err(SolverError::IntegralityPresent)
        ));
    }

    #[test]
    fn strong_duality_on_a_dense_lp() {
        // min -2x - 3y - z
        // s.t. x + y + z <= 10, x - y >= -4, 2x + z = 7, 0<=x<=5, 0<=y<=6, 0<=z<=8
        let p = LpProblem::new(
            vec![
                Variable::new("x", 0.0, 5.0, -2.0),
                Variable::new("y", 0.0, 6.0, -3.0),
                Variable::new("z", 0.0, 8.0, -1.0),
            ],
            vec![
                Constraint::new("c1", vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 10.0),
                Constraint::new("c2", vec![(0, 1.0), (1, -1.0)], Sense::Ge, -4.0),
                Constraint::new("c3", vec![(0, 2.0), (2, 1.0)], Sense::Eq, 7.0),
            ],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        // Primal feasibility.
        let x: Vec<f64> = p
            .variables()
            .iter()
            .map(|v| r.value(&v.name).unwrap())
            .collect();
        assert!(p.max_violation(&x) <= 1e-7);
        // Dual objective = y'b + sum of reduced costs at active bounds
        // must equal the primal objective (strong duality).
        let y: Vec<f64> = p
            .constraints()
            .iter()
            .map(|c| r.dual(&c.tag).unwrap())
            .collect();
        let mut dual_obj: f64 = p
            .constraints()
            .iter()
            .zip(&y)
            .map(|(c, yi)| yi * c.rhs)
            .sum();
        for (j, v) in p.variables().iter().enumerate() {
            let mut d = v.obj;
            for (i, c) in p.constraints().iter().enumerate() {
                for &(jj, a) in &c.terms {
                    if jj == j {
                        d -= y[i] * a;
                    }
                }
            }
            // Attribute the reduced cost to whichever bound the variable
            // sits on (interior variables must price to ~zero).
            if (x[j] - v.lb).abs() < 1e-6 {
                dual_obj += d * v.lb;
                assert!(d > -1e-6, "reduced cost sign at lb: {d}");
            } else if (x[j] - v.ub).abs() < 1e-6 {
                dual_obj += d * v.ub;
                assert!(d < 1e-6, "reduced cost sign at ub: {d}");
            } else {
                assert!(d.abs() < 1e-6, "interior reduced cost: {d}");
                dual_obj += d * x[j];
            }
        }
        assert!(
            (dual_obj - r.objective).abs() <= 1e-6 * (1.0 + r.objective.abs()),
            "dual {dual_obj} vs primal {}",
            r.objective
        );
    }

    #[test]
    fn bound_flip_path() {
        // Optimal solution saturates x at its upper bound with no row active.
        let p = LpProblem::new(
            vec![Variable::new("x", 0.0, 2.0, -1.0)],
            vec![Constraint::new("r", vec![(0, 1.0)], Sense::Le, 5.0)],
        )
        .unwrap();
        let r = solve_lp(&p, &cfg()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value("x").unwrap() - 2.0).abs() < 1e-9);
        assert!((r.dual("r").unwrap()).abs() < 1e-9);
    }
}
