//! Linear programs: a small builder, a deterministic bounded-variable primal
//! simplex, and an LP-text dump for cross-checking with external solvers.
//!
//! Every program is a minimization. Variable bounds may be infinite. Rows are
//! `terms (<=|=|>=) rhs`. Duals follow the `d objective / d rhs` convention,
//! so a binding `<=` row has a nonpositive dual and a binding `>=` row a
//! nonnegative one.

mod lpformat;
mod simplex;

use crate::num::Real;
use std::fmt;

pub use simplex::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub terms: Vec<(VarId, T)>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Real> Constraint<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (v, a)| acc + *a * x[v.0])
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(T::zero()),
            Relation::Ge => (self.rhs - lhs).max(T::zero()),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("constraint `{row}` references undeclared variable #{var}")]
    UnknownVariable { row: String, var: usize },
    #[error("variable `{0}` has a non-finite objective coefficient")]
    NonFiniteCost(String),
    #[error("variable `{name}` has lower bound {lower} above upper bound {upper}")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("constraint `{0}` has a non-finite coefficient or right-hand side")]
    NonFiniteRow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The solver lost accuracy or hit its iteration cap; see diagnostics.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal values, one per declared variable (meaningful when optimal).
    pub x: Vec<T>,
    pub objective: T,
    /// One dual per constraint, present when optimal.
    pub duals: Option<Vec<T>>,
    pub iterations: usize,
    /// Largest row or bound violation of `x`.
    pub max_violation: T,
    pub diagnostics: Option<String>,
}

impl<T: Real> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> T {
        self.x[v.0]
    }

    pub fn dual(&self, r: RowId) -> Option<T> {
        self.duals.as_ref().map(|d| d[r.0])
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram<T> {
    vars: Vec<Variable<T>>,
    rows: Vec<Constraint<T>>,
}

impl<T: Real> LinearProgram<T> {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: T, upper: T, cost: T) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_constraint<I>(
        &mut self,
        name: impl Into<String>,
        terms: I,
        relation: Relation,
        rhs: T,
    ) -> RowId
    where
        I: IntoIterator<Item = (VarId, T)>,
    {
        self.rows.push(Constraint {
            name: name.into(),
            terms: terms.into_iter().collect(),
            relation,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_cost(&mut self, v: VarId, cost: T) {
        self.vars[v.0].cost = cost;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: T, upper: T) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn set_rhs(&mut self, r: RowId, rhs: T) {
        self.rows[r.0].rhs = rhs;
    }

    pub fn variables(&self) -> &[Variable<T>] {
        &self.vars
    }

    pub fn variable(&self, v: VarId) -> &Variable<T> {
        &self.vars[v.0]
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.rows
    }

    pub fn constraint(&self, r: RowId) -> &Constraint<T> {
        &self.rows[r.0]
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.vars
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (v, xv)| acc + v.cost * *xv)
    }

    /// Largest violation of any row or variable bound at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let rows = self
            .rows
            .iter()
            .map(|r| r.violation(x))
            .fold(T::zero(), T::max);
        self.vars.iter().zip(x).fold(rows, |m, (v, xv)| {
            m.max(v.lower - *xv).max(*xv - v.upper)
        })
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for v in &self.vars {
            if !v.cost.is_finite() {
                return Err(LpError::NonFiniteCost(v.name.clone()));
            }
            if v.lower.is_nan()
                || v.upper.is_nan()
                || v.lower > v.upper
                || v.lower == T::infinity()
                || v.upper == T::neg_infinity()
            {
                return Err(LpError::InvertedBounds {
                    name: v.name.clone(),
                    lower: v.lower.as_f64(),
                    upper: v.upper.as_f64(),
                });
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(LpError::NonFiniteRow(r.name.clone()));
            }
            for (v, a) in &r.terms {
                if v.0 >= self.vars.len() {
                    return Err(LpError::UnknownVariable {
                        row: r.name.clone(),
                        var: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFiniteRow(r.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Solves with the default tolerances for `T`.
    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        self.solve_with(&Tolerances::default())
    }

    pub fn solve_with(&self, tol: &Tolerances<T>) -> Result<LpSolution<T>, LpError> {
        self.validate()?;
        Ok(simplex::solve(self, tol))
    }

    /// Renders the program in the CPLEX-style LP text layout.
    pub fn to_lp_string(&self) -> String {
        lpformat::render(self)
    }
}
