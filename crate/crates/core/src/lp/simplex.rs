//! Dense bounded-variable primal simplex with a two-phase start.
//!
//! Pricing is Dantzig's rule with lowest-index tie-breaking; after a run of
//! degenerate pivots it switches to Bland's rule until progress resumes.
//! The ratio test is a two-pass (Harris) test that prefers large pivots.
//! Identical input always produces an identical pivot sequence.

use super::{LinearProgram, LpSolution, LpStatus, Relation};
use crate::linalg::{DenseMatrix, Lu};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<T> {
    /// Absolute tolerance on rows and bounds for the returned point.
    pub feasibility: T,
    /// Reduced-cost threshold for optimality.
    pub optimality: T,
    /// Smallest acceptable pivot element.
    pub pivot: T,
    /// Iteration cap; `None` picks one from the problem size.
    pub max_iterations: Option<usize>,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            feasibility: T::feasibility_tol(),
            optimality: T::optimality_tol(),
            pivot: T::pivot_tol(),
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColState {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic column sitting at zero.
    Zero,
}

enum Step<T> {
    Unbounded,
    Flip(T),
    Pivot { row: usize, theta: T, to_upper: bool },
}

const BLAND_AFTER: usize = 50;

struct Tableau<T> {
    m: usize,
    n: usize,
    a: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    cost: Vec<T>,
    d: Vec<T>,
    x: Vec<T>,
    basis: Vec<usize>,
    state: Vec<ColState>,
    /// Column that was basic in row i at the start, with its coefficient.
    initial: Vec<(usize, T)>,
    first_artificial: usize,
    iterations: usize,
    degenerate_run: usize,
    piv_tol: T,
    opt_tol: T,
    feas_tol: T,
}

impl<T: Real> Tableau<T> {
    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    fn recompute_reduced_costs(&mut self) {
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != T::zero() {
                let row = &self.a[i * self.n..(i + 1) * self.n];
                for (dj, aij) in d.iter_mut().zip(row) {
                    *dj -= cb * *aij;
                }
            }
        }
        for &b in &self.basis {
            d[b] = T::zero();
        }
        self.d = d;
    }

    fn price(&self, bland: bool) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for j in 0..self.n {
            let st = self.state[j];
            if st == ColState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = match st {
                ColState::Lower if dj < -self.opt_tol => T::one(),
                ColState::Upper if dj > self.opt_tol => -T::one(),
                ColState::Zero if dj.abs() > self.opt_tol => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_test(&self, q: usize, dir: T, bland: bool) -> Step<T> {
        let flip = self.upper[q] - self.lower[q];
        let mut relaxed = T::infinity();
        for i in 0..self.m {
            let alpha = self.at(i, q);
            if alpha.abs() <= self.piv_tol {
                continue;
            }
            let rate = -dir * alpha;
            let j = self.basis[i];
            let r = if rate < T::zero() {
                if self.lower[j].is_finite() {
                    (self.x[j] - self.lower[j] + self.feas_tol) / -rate
                } else {
                    continue;
                }
            } else if self.upper[j].is_finite() {
                (self.upper[j] - self.x[j] + self.feas_tol) / rate
            } else {
                continue;
            };
            if r < relaxed {
                relaxed = r;
            }
        }

        let mut chosen: Option<(usize, T, bool, T)> = None;
        if relaxed.is_finite() {
            for i in 0..self.m {
                let alpha = self.at(i, q);
                if alpha.abs() <= self.piv_tol {
                    continue;
                }
                let rate = -dir * alpha;
                let j = self.basis[i];
                let (exact, to_upper) = if rate < T::zero() {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    ((self.x[j] - self.lower[j]) / -rate, false)
                } else {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    ((self.upper[j] - self.x[j]) / rate, true)
                };
                if exact > relaxed {
                    continue;
                }
                let better = match chosen {
                    None => true,
                    Some((ci, _, _, cmag)) => {
                        if bland {
                            self.basis[i] < self.basis[ci]
                        } else {
                            alpha.abs() > cmag
                                || (alpha.abs() == cmag && self.basis[i] < self.basis[ci])
                        }
                    }
                };
                if better {
                    chosen = Some((i, exact.max(T::zero()), to_upper, alpha.abs()));
                }
            }
        }

        match chosen {
            Some((row, theta, to_upper, _)) => {
                if flip.is_finite() && flip <= theta {
                    Step::Flip(flip)
                } else {
                    Step::Pivot {
                        row,
                        theta,
                        to_upper,
                    }
                }
            }
            None if flip.is_finite() => Step::Flip(flip),
            None => Step::Unbounded,
        }
    }

    fn move_along(&mut self, q: usize, dir: T, theta: T) {
        if theta == T::zero() {
            return;
        }
        for i in 0..self.m {
            let alpha = self.a[i * self.n + q];
            if alpha != T::zero() {
                let b = self.basis[i];
                self.x[b] -= dir * alpha * theta;
            }
        }
        self.x[q] += dir * theta;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let piv = self.a[r * n + q];
        let mut nz: Vec<usize> = Vec::new();
        for c in 0..n {
            let v = self.a[r * n + c];
            if v != T::zero() {
                self.a[r * n + c] = v / piv;
                nz.push(c);
            }
        }
        self.a[r * n + q] = T::one();
        let (before, rest) = self.a.split_at_mut(r * n);
        let (prow, after) = rest.split_at_mut(n);
        for row in before.chunks_exact_mut(n).chain(after.chunks_exact_mut(n)) {
            let f = row[q];
            if f != T::zero() {
                for &c in &nz {
                    row[c] -= f * prow[c];
                }
                row[q] = T::zero();
            }
        }
        let f = self.d[q];
        if f != T::zero() {
            for &c in &nz {
                self.d[c] -= f * prow[c];
            }
            self.d[q] = T::zero();
        }
        // the caller settles the leaving column's state
        self.basis[r] = q;
        self.state[q] = ColState::Basic;
    }

    /// Runs simplex iterations on the current cost vector.
    fn run(&mut self, max_iter: usize) -> Result<(), LpStatus> {
        loop {
            if self.iterations >= max_iter {
                return Err(LpStatus::NumericalFailure);
            }
            let bland = self.degenerate_run >= BLAND_AFTER;
            let Some((q, dir)) = self.price(bland) else {
                return Ok(());
            };
            self.iterations += 1;
            match self.ratio_test(q, dir, bland) {
                Step::Unbounded => return Err(LpStatus::Unbounded),
                Step::Flip(theta) => {
                    self.move_along(q, dir, theta);
                    if dir > T::zero() {
                        self.state[q] = ColState::Upper;
                        self.x[q] = self.upper[q];
                    } else {
                        self.state[q] = ColState::Lower;
                        self.x[q] = self.lower[q];
                    }
                    self.degenerate_run = 0;
                }
                Step::Pivot {
                    row,
                    theta,
                    to_upper,
                } => {
                    if theta <= self.feas_tol {
                        self.degenerate_run += 1;
                    } else {
                        self.degenerate_run = 0;
                    }
                    self.move_along(q, dir, theta);
                    let leaving = self.basis[row];
                    self.pivot(row, q);
                    if to_upper {
                        self.state[leaving] = ColState::Upper;
                        self.x[leaving] = self.upper[leaving];
                    } else {
                        self.state[leaving] = ColState::Lower;
                        self.x[leaving] = self.lower[leaving];
                    }
                }
            }
        }
    }
}

pub(super) fn solve<T: Real>(lp: &LinearProgram<T>, tol: &Tolerances<T>) -> LpSolution<T> {
    let nv = lp.num_vars();
    let m = lp.num_constraints();
    let rows = lp.constraints();

    // Column layout: structural | one slack per inequality | artificials.
    let mut slack_of_row = vec![None; m];
    let mut n = nv;
    for (i, r) in rows.iter().enumerate() {
        if r.relation != Relation::Eq {
            slack_of_row[i] = Some(n);
            n += 1;
        }
    }
    let first_artificial = n;

    let mut lower: Vec<T> = lp.variables().iter().map(|v| v.lower).collect();
    let mut upper: Vec<T> = lp.variables().iter().map(|v| v.upper).collect();
    lower.resize(n, T::zero());
    upper.resize(n, T::infinity());

    let mut x = vec![T::zero(); n];
    let mut state = vec![ColState::Lower; n];
    for j in 0..nv {
        if lower[j].is_finite() {
            x[j] = lower[j];
            state[j] = ColState::Lower;
        } else if upper[j].is_finite() {
            x[j] = upper[j];
            state[j] = ColState::Upper;
        } else {
            x[j] = T::zero();
            state[j] = ColState::Zero;
        }
    }

    // Residuals and the starting basis.
    let mut basis = vec![0usize; m];
    let mut initial = vec![(0usize, T::one()); m];
    let mut art_rows: Vec<(usize, T)> = Vec::new();
    let mut residual = vec![T::zero(); m];
    for (i, r) in rows.iter().enumerate() {
        residual[i] = r.rhs - r.activity(&x);
        let slack_sign = match r.relation {
            Relation::Le => Some(T::one()),
            Relation::Ge => Some(-T::one()),
            Relation::Eq => None,
        };
        match (slack_sign, slack_of_row[i]) {
            (Some(sigma), Some(s)) if residual[i] * sigma >= T::zero() => {
                basis[i] = s;
                initial[i] = (s, sigma);
                x[s] = residual[i] * sigma;
                state[s] = ColState::Basic;
            }
            _ => {
                let sigma = if residual[i] < T::zero() {
                    -T::one()
                } else {
                    T::one()
                };
                art_rows.push((i, sigma));
            }
        }
    }
    let n_total = n + art_rows.len();
    lower.resize(n_total, T::zero());
    upper.resize(n_total, T::infinity());
    x.resize(n_total, T::zero());
    state.resize(n_total, ColState::Basic);
    for (k, &(i, sigma)) in art_rows.iter().enumerate() {
        let col = n + k;
        basis[i] = col;
        initial[i] = (col, sigma);
        x[col] = residual[i] * sigma;
    }

    // Tableau B0^{-1} A with B0 = diag(sigma).
    let mut a = vec![T::zero(); m * n_total];
    for (i, r) in rows.iter().enumerate() {
        let sigma = initial[i].1;
        let row = &mut a[i * n_total..(i + 1) * n_total];
        for (v, coef) in &r.terms {
            row[v.index()] += *coef * sigma;
        }
        if let Some(s) = slack_of_row[i] {
            let coef = if r.relation == Relation::Le {
                T::one()
            } else {
                -T::one()
            };
            row[s] = coef * sigma;
        }
        row[initial[i].0] = T::one();
    }

    let max_iter = tol
        .max_iterations
        .unwrap_or(50 * (m + n_total) + 1000);

    let mut tab = Tableau {
        m,
        n: n_total,
        a,
        lower,
        upper,
        cost: vec![T::zero(); n_total],
        d: vec![T::zero(); n_total],
        x,
        basis,
        state,
        initial,
        first_artificial,
        iterations: 0,
        degenerate_run: 0,
        piv_tol: tol.pivot,
        opt_tol: tol.optimality,
        feas_tol: tol.feasibility * T::lit(1e-2),
    };

    let fail = |tab: &Tableau<T>, status: LpStatus, msg: String| LpSolution {
        status,
        x: tab.x[..nv].to_vec(),
        objective: T::nan(),
        duals: None,
        iterations: tab.iterations,
        max_violation: T::nan(),
        diagnostics: Some(msg),
    };

    // Phase 1.
    if !art_rows.is_empty() {
        for j in first_artificial..n_total {
            tab.cost[j] = T::one();
        }
        tab.recompute_reduced_costs();
        if let Err(status) = tab.run(max_iter) {
            let msg = format!("phase 1 stopped after {} iterations", tab.iterations);
            let status = if status == LpStatus::Unbounded {
                LpStatus::NumericalFailure
            } else {
                status
            };
            return fail(&tab, status, msg);
        }
        let worst = (first_artificial..n_total)
            .map(|j| tab.x[j].abs())
            .fold(T::zero(), T::max);
        if worst > tol.feasibility {
            return fail(
                &tab,
                LpStatus::Infeasible,
                format!("phase 1 residual {worst:e}"),
            );
        }
        for j in first_artificial..n_total {
            tab.upper[j] = T::zero();
            tab.cost[j] = T::zero();
            if tab.state[j] != ColState::Basic {
                tab.x[j] = T::zero();
                tab.state[j] = ColState::Lower;
            }
        }
        drive_out_artificials(&mut tab);
    }

    // Phase 2.
    for (j, v) in lp.variables().iter().enumerate() {
        tab.cost[j] = v.cost;
    }
    tab.recompute_reduced_costs();
    tab.degenerate_run = 0;
    if let Err(status) = tab.run(max_iter) {
        let msg = match status {
            LpStatus::Unbounded => "objective unbounded below".to_string(),
            _ => format!("iteration cap {max_iter} reached"),
        };
        return fail(&tab, status, msg);
    }

    let mut xs = tab.x[..nv].to_vec();
    let mut violation = lp.max_violation(&xs);
    let mut polished = false;
    if !(violation <= tol.feasibility * T::lit(0.1)) {
        if let Some(refined) = polish(lp, &tab, &slack_of_row) {
            let v2 = lp.max_violation(&refined[..nv]);
            if v2 < violation || violation.is_nan() {
                xs = refined[..nv].to_vec();
                violation = v2;
                polished = true;
            }
        }
    }
    if !(violation <= tol.feasibility) {
        return LpSolution {
            status: LpStatus::NumericalFailure,
            objective: lp.objective_value(&xs),
            x: xs,
            duals: None,
            iterations: tab.iterations,
            max_violation: violation,
            diagnostics: Some(format!(
                "optimal basis violates constraints by {violation:e} (polished: {polished})"
            )),
        };
    }

    let duals: Vec<T> = tab
        .initial
        .iter()
        .map(|&(col, sigma)| (tab.cost[col] - tab.d[col]) * sigma)
        .collect();

    LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&xs),
        x: xs,
        duals: Some(duals),
        iterations: tab.iterations,
        max_violation: violation,
        diagnostics: None,
    }
}

fn drive_out_artificials<T: Real>(tab: &mut Tableau<T>) {
    for r in 0..tab.m {
        if tab.basis[r] < tab.first_artificial {
            continue;
        }
        let mut best: Option<(usize, T)> = None;
        for j in 0..tab.first_artificial {
            if tab.state[j] == ColState::Basic {
                continue;
            }
            let v = tab.at(r, j).abs();
            if v > T::lit(1e-7) && best.map_or(true, |(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        if let Some((q, _)) = best {
            let leaving = tab.basis[r];
            tab.pivot(r, q);
            tab.state[leaving] = ColState::Lower;
            tab.x[leaving] = T::zero();
        }
    }
}

/// Recomputes basic values from the original data with a fresh LU of the
/// basis matrix.
fn polish<T: Real>(
    lp: &LinearProgram<T>,
    tab: &Tableau<T>,
    slack_of_row: &[Option<usize>],
) -> Option<Vec<T>> {
    let m = tab.m;
    let nv = lp.num_vars();
    let rows = lp.constraints();
    // Column j of A as (row, coef) pairs, only for the columns we need.
    let column = |j: usize| -> Option<Vec<(usize, T)>> {
        if j < nv {
            Some(rows.iter()
                .enumerate()
                .filter_map(|(i, r)| {
                    let s = r
                        .terms
                        .iter()
                        .filter(|(v, _)| v.index() == j)
                        .fold(T::zero(), |acc, (_, c)| acc + *c);
                    (s != T::zero()).then_some((i, s))
                })
                .collect())
        } else if j < tab.first_artificial {
            let i = slack_of_row.iter().position(|s| *s == Some(j))?;
            let c = if rows[i].relation == Relation::Le {
                T::one()
            } else {
                -T::one()
            };
            Some(vec![(i, c)])
        } else {
            let i = tab.initial.iter().position(|(c, _)| *c == j)?;
            Some(vec![(i, tab.initial[i].1)])
        }
    };
    let column = |j: usize| column(j).unwrap_or_default();

    let mut b = DenseMatrix::zeros(m, m);
    for (k, &j) in tab.basis.iter().enumerate() {
        for (i, c) in column(j) {
            b.set(i, k, c);
        }
    }
    let mut rhs: Vec<T> = rows.iter().map(|r| r.rhs).collect();
    for j in 0..tab.n {
        if tab.state[j] == ColState::Basic || tab.x[j] == T::zero() {
            continue;
        }
        for (i, c) in column(j) {
            rhs[i] -= c * tab.x[j];
        }
    }
    let lu = Lu::factor(&b).ok()?;
    let xb = lu.solve(&rhs);
    let mut x = tab.x.clone();
    for (k, &j) in tab.basis.iter().enumerate() {
        x[j] = xb[k];
    }
    Some(x)
}
