use crate::linalg::{DenseMatrix, Lu};
use crate::num::Real;
use crate::scenario::NetworkCase;

use super::GridError;

/// Line-by-bus flow sensitivities to injections balanced at the reference bus.
#[derive(Debug, Clone, PartialEq)]
pub struct PtdfMatrix<T> {
    matrix: DenseMatrix<T>,
    ref_index: usize,
}

impl<T: Real> PtdfMatrix<T> {
    pub fn n_lines(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_buses(&self) -> usize {
        self.matrix.cols()
    }

    pub fn ref_index(&self) -> usize {
        self.ref_index
    }

    #[inline]
    pub fn get(&self, line: usize, bus: usize) -> T {
        self.matrix.get(line, bus)
    }

    pub fn row(&self, line: usize) -> &[T] {
        self.matrix.row(line)
    }

    /// Line flows (MW) for net nodal injections (MW, bus order). Any imbalance
    /// is absorbed at the reference bus.
    pub fn flows(&self, injections: &[T]) -> Vec<T> {
        self.matrix.mul_vec(injections)
    }
}

/// `PTDF[l][n] = b_l (X[i][n] - X[j][n])` with `X` the inverse of the reduced
/// susceptance matrix (reference row and column removed, zero-padded).
pub fn compute_ptdf<T: Real>(case: &NetworkCase) -> Result<PtdfMatrix<T>, GridError> {
    let n = case.n_buses();
    let r = case
        .bus_index(case.ref_bus)
        .ok_or_else(|| GridError::Topology(format!("reference bus {} missing", case.ref_bus)))?;
    let reduced = |k: usize| if k < r { k } else { k - 1 };
    let ends: Vec<(usize, usize, T)> = case
        .lines
        .iter()
        .map(|l| {
            let i = case.bus_index(l.from);
            let j = case.bus_index(l.to);
            match (i, j) {
                (Some(i), Some(j)) => Ok((i, j, T::lit(l.b_pu))),
                _ => Err(GridError::Topology(format!(
                    "line {}-{} has an unknown endpoint",
                    l.from, l.to
                ))),
            }
        })
        .collect::<Result<_, _>>()?;

    let m = n - 1;
    let mut b = DenseMatrix::<T>::zeros(m, m);
    for &(i, j, bl) in &ends {
        if i != r {
            b.add_to(reduced(i), reduced(i), bl);
        }
        if j != r {
            b.add_to(reduced(j), reduced(j), bl);
        }
        if i != r && j != r {
            b.add_to(reduced(i), reduced(j), -bl);
            b.add_to(reduced(j), reduced(i), -bl);
        }
    }
    let lu = Lu::factor(&b)?;

    // x[k] holds column k of the reduced inverse.
    let mut x = DenseMatrix::<T>::zeros(n, n);
    let mut e = vec![T::zero(); m];
    for col in 0..n {
        if col == r {
            continue;
        }
        e.iter_mut().for_each(|v| *v = T::zero());
        e[reduced(col)] = T::one();
        let sol = lu.solve(&e);
        for row in 0..n {
            if row != r {
                x.set(row, col, sol[reduced(row)]);
            }
        }
    }

    let mut matrix = DenseMatrix::<T>::zeros(ends.len(), n);
    for (l, &(i, j, bl)) in ends.iter().enumerate() {
        for col in 0..n {
            if col != r {
                matrix.set(l, col, bl * (x.get(i, col) - x.get(j, col)));
            }
        }
    }
    Ok(PtdfMatrix {
        matrix,
        ref_index: r,
    })
}
