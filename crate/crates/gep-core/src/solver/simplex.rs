//! Bounded-variable revised simplex with sparse basis factorization.
//!
//! Problems are solved in the computational form `min c'x, A x + s = b`,
//! where every row gets a logical variable whose bounds encode the row sense
//! (`=` -> [0,0], `<=` -> [0,inf), `>=` -> (-inf,0]). Both structural and
//! logical variables carry lower/upper bounds, so variable-bound rows never
//! need to enter the basis machinery.
//!
//! Phase 1 minimizes the total bound infeasibility of the basic variables
//! with a piecewise-linear cost (+1 above the upper bound, -1 below the
//! lower bound); the ratio test is conservative and stops at the first bound
//! crossing, which keeps the phase-1 costs valid along the whole step.
//! Dantzig pricing is the default; Bland's rule is engaged after a stall of
//! degenerate pivots and disengaged once progress resumes.

use super::lu::SparseLu;
use super::{SolverConfig, SolverError};
use crate::lp::{LpProblem, Sense};

/// How many basis updates may accumulate before refactorization.
const REFACTOR_EVERY: usize = 64;

/// Pivot elements below this magnitude are not eligible to leave the basis.
const PIVOT_TOL: f64 = 1e-9;

/// Outcome of a raw simplex solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RawStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct RawSolution {
    pub status: RawStatus,
    /// Structural variable values (valid for Optimal and IterationLimit).
    pub x: Vec<f64>,
    /// Row duals: marginal objective change per unit of rhs increase.
    pub y: Vec<f64>,
    /// Objective value of `x` excluding any constant offset.
    pub obj: f64,
    pub iterations: u64,
    pub factorizations: u64,
}

/// Immutable computational form shared by repeated solves (e.g. B&B nodes).
pub(crate) struct CompForm {
    pub m: usize,
    pub n_struct: usize,
    /// Columns for all variables: structural first, then one singleton
    /// logical column per row.
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    rhs: Vec<f64>,
    max_abs_cost: f64,
}

impl CompForm {
    pub fn from_problem(p: &LpProblem) -> Self {
        let m = p.num_constraints();
        let n = p.num_vars();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        let mut cost = vec![0.0; n + m];
        for (j, v) in p.variables().iter().enumerate() {
            lb.push(v.lb);
            ub.push(v.ub);
            cost[j] = v.obj;
        }
        let mut rhs = Vec::with_capacity(m);
        for (i, c) in p.constraints().iter().enumerate() {
            for &(j, a) in &c.terms {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            cols[n + i].push((i, 1.0));
            let (l, u) = match c.sense {
                Sense::Eq => (0.0, 0.0),
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
            };
            lb.push(l);
            ub.push(u);
            rhs.push(c.rhs);
        }
        let max_abs_cost = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
        CompForm {
            m,
            n_struct: n,
            cols,
            cost,
            lb,
            ub,
            rhs,
            max_abs_cost,
        }
    }

    fn n_total(&self) -> usize {
        self.n_struct + self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VStat {
    Basic(usize),
    AtLb,
    AtUb,
    /// Nonbasic free variable held at zero.
    Free,
}

struct Eta {
    pos: usize,
    /// Nonzeros of the transformed entering column B^-1 a_q.
    col: Vec<(usize, f64)>,
    pivot: f64,
}

pub(crate) struct Simplex<'a> {
    form: &'a CompForm,
    lb: Vec<f64>,
    ub: Vec<f64>,
    feas_tol: f64,
    dual_tol: f64,
    vstat: Vec<VStat>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    lu: Option<SparseLu>,
    etas: Vec<Eta>,
    scratch: Vec<f64>,
    work: Vec<f64>,
    factorizations: u64,
}

impl<'a> Simplex<'a> {
    /// Create a solver over `form` with optional bound overrides (used by
    /// branch-and-bound to tighten structural variables).
    pub fn new(form: &'a CompForm, cfg: &SolverConfig, overrides: &[(usize, f64, f64)]) -> Self {
        let mut lb = form.lb.clone();
        let mut ub = form.ub.clone();
        for &(j, l, u) in overrides {
            lb[j] = l;
            ub[j] = u;
        }
        let dual_tol = (cfg.optimality_tol * (1.0 + form.max_abs_cost)).max(1e-9);
        Simplex {
            form,
            lb,
            ub,
            feas_tol: cfg.feasibility_tol,
            dual_tol,
            vstat: Vec::new(),
            basis: Vec::new(),
            xb: Vec::new(),
            lu: None,
            etas: Vec::new(),
            scratch: Vec::new(),
            work: Vec::new(),
            factorizations: 0,
        }
    }

    fn nb_value(&self, j: usize) -> f64 {
        match self.vstat[j] {
            VStat::AtLb => self.lb[j],
            VStat::AtUb => self.ub[j],
            VStat::Free => 0.0,
            VStat::Basic(_) => unreachable!("basic variable has no nonbasic value"),
        }
    }

    /// Initial point: every structural nonbasic at the finite bound nearest
    /// zero; rows start with their logical basic. Equality and violated rows
    /// are crashed with structural singleton columns where possible, which
    /// gives GEP balance rows a feasible start (non-supplied energy carries
    /// the demand).
    fn initial_basis(&mut self) {
        let form = self.form;
        let n_total = form.n_total();
        self.vstat = (0..n_total)
            .map(|j| {
                if self.lb[j].is_finite() {
                    VStat::AtLb
                } else if self.ub[j].is_finite() {
                    VStat::AtUb
                } else {
                    VStat::Free
                }
            })
            .collect();
        self.basis = (0..form.m).map(|i| form.n_struct + i).collect();
        for i in 0..form.m {
            self.vstat[form.n_struct + i] = VStat::Basic(i);
        }

        // Row residuals with every structural variable at its start value.
        let mut resid = form.rhs.clone();
        for j in 0..form.n_struct {
            let v = self.nb_value(j);
            if v != 0.0 {
                for &(i, a) in &form.cols[j] {
                    resid[i] -= a * v;
                }
            }
        }
        // Crash: for rows whose logical cannot hold the residual, pivot in a
        // structural singleton column instead.
        for j in 0..form.n_struct {
            if form.cols[j].len() != 1 {
                continue;
            }
            let (i, a) = form.cols[j][0];
            if a.abs() < 1e-12 {
                continue;
            }
            let li = form.n_struct + i;
            if !matches!(self.vstat[li], VStat::Basic(_)) {
                continue; // row already crashed
            }
            let s = resid[i];
            let logical_ok = s >= self.lb[li] - self.feas_tol && s <= self.ub[li] + self.feas_tol;
            if logical_ok {
                continue;
            }
            let v = self.nb_value(j) + s / a;
            if v >= self.lb[j] - self.feas_tol && v <= self.ub[j] + self.feas_tol {
                self.basis[i] = j;
                self.vstat[j] = VStat::Basic(i);
                self.vstat[li] = if self.lb[li].is_finite() {
                    VStat::AtLb
                } else {
                    VStat::AtUb
                };
            }
        }
    }

    fn factorize(&mut self) -> Result<(), SolverError> {
        let form = self.form;
        let basis = &self.basis;
        match SparseLu::factorize(form.m, |k| form.cols[basis[k]].as_slice()) {
            Ok(lu) => {
                self.lu = Some(lu);
                self.etas.clear();
                self.factorizations += 1;
                Ok(())
            }
            Err(_) => Err(SolverError::Numerical("singular basis".into())),
        }
    }

    /// Recompute basic values from scratch: x_B = B^-1 (b - N x_N).
    fn compute_basics(&mut self) {
        let form = self.form;
        let mut r = form.rhs.clone();
        for j in 0..form.n_total() {
            if matches!(self.vstat[j], VStat::Basic(_)) {
                continue;
            }
            let v = self.nb_value(j);
            if v != 0.0 {
                for &(i, a) in &form.cols[j] {
                    r[i] -= a * v;
                }
            }
        }
        self.ftran(&mut r);
        self.xb = r;
    }

    fn ftran(&mut self, v: &mut Vec<f64>) {
        self.lu
            .as_ref()
            .expect("factorized")
            .ftran(v, &mut self.scratch);
        for eta in &self.etas {
            let t = v[eta.pos] / eta.pivot;
            if t != 0.0 {
                for &(i, w) in &eta.col {
                    v[i] -= w * t;
                }
                v[eta.pos] = t;
            }
        }
    }

    fn btran(&mut self, v: &mut Vec<f64>) {
        for eta in self.etas.iter().rev() {
            let mut s = v[eta.pos];
            for &(i, w) in &eta.col {
                s -= w * v[i];
            }
            v[eta.pos] = s / eta.pivot;
        }
        self.lu
            .as_ref()
            .expect("factorized")
            .btran(v, &mut self.scratch);
    }

    fn total_infeasibility(&self) -> f64 {
        let mut s = 0.0;
        for (p, &b) in self.basis.iter().enumerate() {
            let v = self.xb[p];
            if v < self.lb[b] {
                s += self.lb[b] - v;
            } else if v > self.ub[b] {
                s += v - self.ub[b];
            }
        }
        s
    }

    /// Reduced costs of all nonbasic variables given duals `y` and the
    /// active-phase cost of nonbasics (zero in phase 1).
    fn price(
        &self,
        y: &[f64],
        phase1: bool,
        bland: bool,
    ) -> Option<(usize, f64 /* direction */, f64 /* |d| */)> {
        let form = self.form;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..form.n_total() {
            let (can_up, can_down) = match self.vstat[j] {
                VStat::Basic(_) => continue,
                VStat::AtLb => (self.ub[j] > self.lb[j], false),
                VStat::AtUb => (false, self.ub[j] > self.lb[j]),
                VStat::Free => (true, true),
            };
            if !can_up && !can_down {
                continue;
            }
            let mut d = if phase1 { 0.0 } else { self.form.cost[j] };
            for &(i, a) in &form.cols[j] {
                d -= y[i] * a;
            }
            let score = if can_up && d < -self.dual_tol {
                Some((1.0, -d))
            } else if can_down && d > self.dual_tol {
                Some((-1.0, d))
            } else {
                None
            };
            if let Some((dir, mag)) = score {
                if bland {
                    return Some((j, dir, mag));
                }
                match best {
                    Some((_, _, bm)) if bm >= mag => {}
                    _ => best = Some((j, dir, mag)),
                }
            }
        }
        best
    }

    /// Run the simplex. Returns structural solution, duals and status.
    pub fn solve(&mut self, cfg: &SolverConfig) -> Result<RawSolution, SolverError> {
        let form = self.form;
        self.initial_basis();
        self.factorize()?;
        self.compute_basics();

        let mut iters: u64 = 0;
        let mut bland = false;
        let mut stall: u64 = 0;
        let status = loop {
            if iters >= cfg.max_iterations {
                break RawStatus::IterationLimit;
            }

            let infeas = self.total_infeasibility();
            let phase1 = infeas > self.feas_tol;

            // Duals for the active phase.
            let mut y = vec![0.0; form.m];
            for (p, &b) in self.basis.iter().enumerate() {
                y[p] = if phase1 {
                    if self.xb[p] > self.ub[b] + self.feas_tol {
                        1.0
                    } else if self.xb[p] < self.lb[b] - self.feas_tol {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    form.cost[b]
                };
            }
            self.btran(&mut y);

            let entering = self.price(&y, phase1, bland);
            let (q, dir) = match entering {
                Some((q, dir, _)) => (q, dir),
                None => {
                    if phase1 {
                        break RawStatus::Infeasible;
                    }
                    break RawStatus::Optimal;
                }
            };

            // Transformed column w = B^-1 a_q.
            let mut w = vec![0.0; form.m];
            for &(i, a) in &form.cols[q] {
                w[i] = a;
            }
            self.ftran(&mut w);

            // Ratio test: first bound crossing along the step.
            let own_range = self.ub[q] - self.lb[q]; // may be +inf
            let mut t_best = f64::INFINITY;
            let mut leave: Option<(usize, f64 /*target*/, f64 /*|w|*/)> = None;
            for (p, &wp) in w.iter().enumerate() {
                if wp.abs() <= PIVOT_TOL {
                    continue;
                }
                let delta = -dir * wp;
                let b = self.basis[p];
                let target = if delta > 0.0 {
                    if self.xb[p] < self.lb[b] - self.feas_tol {
                        self.lb[b]
                    } else {
                        self.ub[b]
                    }
                } else if self.xb[p] > self.ub[b] + self.feas_tol {
                    self.ub[b]
                } else {
                    self.lb[b]
                };
                if !target.is_finite() {
                    continue;
                }
                let ratio = ((target - self.xb[p]) / delta).max(0.0);
                let better = if bland {
                    ratio < t_best - 1e-12
                        || (ratio <= t_best + 1e-12
                            && leave.as_ref().map_or(true, |&(lp, _, _)| {
                                self.basis[p] < self.basis[lp]
                            }))
                } else {
                    ratio < t_best - 1e-12
                        || (ratio <= t_best + 1e-12
                            && leave.as_ref().map_or(true, |&(_, _, lw)| wp.abs() > lw))
                };
                if better {
                    t_best = t_best.min(ratio);
                    leave = Some((p, target, wp.abs()));
                }
            }

            let step_to_own = if own_range.is_finite() {
                own_range
            } else {
                f64::INFINITY
            };

            iters += 1;
            if leave.is_none() || t_best >= step_to_own {
                // Bound flip or unbounded ray.
                if !step_to_own.is_finite() {
                    if phase1 {
                        return Err(SolverError::Numerical(
                            "phase 1 detected an unbounded infeasibility ray".into(),
                        ));
                    }
                    break RawStatus::Unbounded;
                }
                let t = step_to_own;
                for (p, &wp) in w.iter().enumerate() {
                    if wp != 0.0 {
                        self.xb[p] -= dir * t * wp;
                    }
                }
                self.vstat[q] = match self.vstat[q] {
                    VStat::AtLb => VStat::AtUb,
                    VStat::AtUb => VStat::AtLb,
                    other => other,
                };
                stall = if t <= 1e-12 { stall + 1 } else { 0 };
            } else {
                let (r, target, _) = leave.unwrap();
                let t = t_best;
                for (p, &wp) in w.iter().enumerate() {
                    if wp != 0.0 {
                        self.xb[p] -= dir * t * wp;
                    }
                }
                let leaving = self.basis[r];
                self.vstat[leaving] = if target == self.lb[leaving] {
                    VStat::AtLb
                } else {
                    VStat::AtUb
                };
                let entering_value = match self.vstat[q] {
                    VStat::AtLb => self.lb[q] + dir * t,
                    VStat::AtUb => self.ub[q] + dir * t,
                    VStat::Free => dir * t,
                    VStat::Basic(_) => unreachable!(),
                };
                self.basis[r] = q;
                self.vstat[q] = VStat::Basic(r);
                self.xb[r] = entering_value;

                let pivot = w[r];
                let col: Vec<(usize, f64)> = w
                    .iter()
                    .enumerate()
                    .filter(|&(p, &v)| p != r && v.abs() > 1e-13)
                    .map(|(p, &v)| (p, v))
                    .collect();
                self.etas.push(Eta {
                    pos: r,
                    col,
                    pivot,
                });
                if self.etas.len() >= REFACTOR_EVERY {
                    self.factorize()?;
                    self.compute_basics();
                }
                stall = if t <= 1e-12 { stall + 1 } else { 0 };
            }
            if stall > cfg.stall_iterations {
                bland = true;
            } else if stall == 0 {
                bland = false;
            }
        };

        // Clean recomputation of the final point and duals.
        if status == RawStatus::Optimal && !self.etas.is_empty() {
            self.factorize()?;
        }
        if self.lu.is_some() {
            self.compute_basics();
        }
        let mut x = vec![0.0; form.n_total()];
        for j in 0..form.n_total() {
            x[j] = match self.vstat[j] {
                VStat::Basic(p) => self.xb[p],
                _ => self.nb_value(j),
            };
        }
        let mut y = vec![0.0; form.m];
        for (p, &b) in self.basis.iter().enumerate() {
            y[p] = form.cost[b];
        }
        self.btran(&mut y);
        let obj = (0..form.n_struct).map(|j| form.cost[j] * x[j]).sum();
        Ok(RawSolution {
            status,
            x: x[..form.n_struct].to_vec(),
            y,
            obj,
            iterations: iters,
            factorizations: self.factorizations,
        })
    }
}
