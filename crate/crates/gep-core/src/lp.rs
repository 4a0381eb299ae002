//! Structural LP/MILP carrier.
//!
//! An [`LpProblem`] is an immutable, solver-agnostic description of a linear
//! (or mixed-binary) minimization problem. Rows carry semantic tags so that
//! dual values can be harvested by name (e.g. `balance[17]`) rather than by
//! row index.

use std::collections::HashMap;

use thiserror::Error;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Equality row.
    Eq,
    /// Less-or-equal row.
    Le,
    /// Greater-or-equal row.
    Ge,
}

impl std::fmt::Display for Sense {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sense::Eq => write!(f, "="),
            Sense::Le => write!(f, "<="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

/// A decision variable: bounds, objective coefficient, integrality flag.
#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
    /// Binary indicator flag. Integral variables must have bounds within [0,1].
    pub integer: bool,
}

impl Variable {
    /// Continuous variable.
    pub fn new(name: impl Into<String>, lb: f64, ub: f64, obj: f64) -> Self {
        Variable {
            name: name.into(),
            lb,
            ub,
            obj,
            integer: false,
        }
    }

    /// Binary variable with bounds [0,1].
    pub fn binary(name: impl Into<String>, obj: f64) -> Self {
        Variable {
            name: name.into(),
            lb: 0.0,
            ub: 1.0,
            obj,
            integer: true,
        }
    }
}

/// A linear row: tag, sparse coefficient list, sense and right-hand side.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub tag: String,
    /// (variable index, coefficient) pairs; indices are unique within a row.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(tag: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Constraint {
            tag: tag.into(),
            terms,
            sense,
            rhs,
        }
    }
}

/// Structural validation failures.
#[derive(Debug, Error)]
pub enum LpError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate row tag `{0}`")]
    DuplicateTag(String),
    #[error("row `{tag}` references undeclared variable index {index}")]
    UnknownVariable { tag: String, index: usize },
    #[error("row `{tag}` references variable index {index} more than once")]
    DuplicateTerm { tag: String, index: usize },
    #[error("variable `{0}` has inconsistent bounds (lb > ub or NaN)")]
    BadBounds(String),
    #[error("integral variable `{0}` must have bounds within [0,1]")]
    NonBinaryInteger(String),
    #[error("variable `{0}` not present in this problem")]
    NoSuchVariable(String),
}

/// Immutable LP/MILP in minimization form.
#[derive(Debug, Clone)]
pub struct LpProblem {
    vars: Vec<Variable>,
    cons: Vec<Constraint>,
    /// Constant added to the objective (used when variables are substituted
    /// by constants, e.g. fixed investments).
    obj_offset: f64,
    by_name: HashMap<String, usize>,
    by_tag: HashMap<String, usize>,
}

impl LpProblem {
    /// Validate and freeze a problem. The objective sense is always minimize.
    pub fn new(vars: Vec<Variable>, cons: Vec<Constraint>) -> Result<Self, LpError> {
        Self::with_offset(vars, cons, 0.0)
    }

    /// As [`LpProblem::new`] with a constant objective offset.
    pub fn with_offset(
        vars: Vec<Variable>,
        cons: Vec<Constraint>,
        obj_offset: f64,
    ) -> Result<Self, LpError> {
        let mut by_name = HashMap::with_capacity(vars.len());
        for (i, v) in vars.iter().enumerate() {
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
                return Err(LpError::BadBounds(v.name.clone()));
            }
            if v.integer && !(v.lb >= 0.0 && v.ub <= 1.0) {
                return Err(LpError::NonBinaryInteger(v.name.clone()));
            }
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(LpError::DuplicateVariable(v.name.clone()));
            }
        }
        let mut by_tag = HashMap::with_capacity(cons.len());
        for (r, c) in cons.iter().enumerate() {
            if by_tag.insert(c.tag.clone(), r).is_some() {
                return Err(LpError::DuplicateTag(c.tag.clone()));
            }
            let mut seen = vec![];
            for &(j, _) in &c.terms {
                if j >= vars.len() {
                    return Err(LpError::UnknownVariable {
                        tag: c.tag.clone(),
                        index: j,
                    });
                }
                if seen.contains(&j) {
                    return Err(LpError::DuplicateTerm {
                        tag: c.tag.clone(),
                        index: j,
                    });
                }
                seen.push(j);
            }
        }
        Ok(LpProblem {
            vars,
            cons,
            obj_offset,
            by_name,
            by_tag,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.cons
    }

    pub fn variable(&self, index: usize) -> &Variable {
        &self.vars[index]
    }

    pub fn constraint(&self, row: usize) -> &Constraint {
        &self.cons[row]
    }

    pub fn obj_offset(&self) -> f64 {
        self.obj_offset
    }

    /// Index of a variable by name.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Index of a row by tag.
    pub fn row_index(&self, tag: &str) -> Option<usize> {
        self.by_tag.get(tag).copied()
    }

    /// Count of variables carrying the integrality flag.
    pub fn num_integers(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    /// True if any variable carries the integrality flag.
    pub fn is_mip(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    /// Objective value of a dense assignment (including the offset).
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.vars.len());
        self.obj_offset
            + self
                .vars
                .iter()
                .zip(x)
                .map(|(v, &xi)| v.obj * xi)
                .sum::<f64>()
    }

    /// Left-hand-side activity of row `r` under a dense assignment.
    pub fn row_activity(&self, r: usize, x: &[f64]) -> f64 {
        self.cons[r].terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Maximum absolute constraint violation and bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xi) in self.vars.iter().zip(x) {
            if xi < v.lb {
                worst = worst.max(v.lb - xi);
            }
            if xi > v.ub {
                worst = worst.max(xi - v.ub);
            }
        }
        for (r, c) in self.cons.iter().enumerate() {
            let act = self.row_activity(r, x);
            let viol = match c.sense {
                Sense::Eq => (act - c.rhs).abs(),
                Sense::Le => (act - c.rhs).max(0.0),
                Sense::Ge => (c.rhs - act).max(0.0),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_names_and_tags() {
        let vars = vec![
            Variable::new("x", 0.0, 1.0, 1.0),
            Variable::new("x", 0.0, 1.0, 1.0),
        ];
        assert!(matches!(
            LpProblem::new(vars, vec![]),
            Err(LpError::DuplicateVariable(_))
        ));

        let vars = vec![Variable::new("x", 0.0, 1.0, 1.0)];
        let cons = vec![
            Constraint::new("r", vec![(0, 1.0)], Sense::Le, 1.0),
            Constraint::new("r", vec![(0, 2.0)], Sense::Ge, 0.0),
        ];
        assert!(matches!(
            LpProblem::new(vars, cons),
            Err(LpError::DuplicateTag(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_term() {
        let vars = vec![Variable::new("x", 0.0, 1.0, 1.0)];
        let cons = vec![Constraint::new("r", vec![(3, 1.0)], Sense::Le, 1.0)];
        assert!(matches!(
            LpProblem::new(vars, cons),
            Err(LpError::UnknownVariable { .. })
        ));
    }

    #[test]
    fn rejects_non_binary_integer() {
        let mut v = Variable::new("n", 0.0, 4.0, 1.0);
        v.integer = true;
        assert!(matches!(
            LpProblem::new(vec![v], vec![]),
            Err(LpError::NonBinaryInteger(_))
        ));
    }

    #[test]
    fn activity_and_objective() {
        let vars = vec![
            Variable::new("x", 0.0, 10.0, 2.0),
            Variable::new("y", 0.0, 10.0, 3.0),
        ];
        let cons = vec![Constraint::new(
            "r",
            vec![(0, 1.0), (1, -1.0)],
            Sense::Eq,
            1.0,
        )];
        let p = LpProblem::with_offset(vars, cons, 5.0).unwrap();
        let x = vec![3.0, 2.0];
        assert_eq!(p.row_activity(0, &x), 1.0);
        assert_eq!(p.objective_value(&x), 5.0 + 6.0 + 6.0);
        assert_eq!(p.max_violation(&x), 0.0);
        assert_eq!(p.row_index("r"), Some(0));
        assert_eq!(p.var_index("y"), Some(1));
    }
}
