use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Scalar type used by the numerical kernels (dense factorization, simplex,
/// PTDF, protection terms).
///
/// Implemented for `f32` and `f64`. Everything above the kernels works in
/// `f64` through the aliases at the crate root.
pub trait Real:
    'static
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
{
    /// Absolute feasibility tolerance appropriate for this precision.
    fn feasibility_tol() -> Self;
    /// Reduced-cost tolerance used when pricing.
    fn optimality_tol() -> Self;
    /// Smallest pivot magnitude the simplex will accept.
    fn pivot_tol() -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn feasibility_tol() -> Self {
        1e-7
    }
    fn optimality_tol() -> Self {
        1e-9
    }
    fn pivot_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn feasibility_tol() -> Self {
        2e-3
    }
    fn optimality_tol() -> Self {
        1e-4
    }
    fn pivot_tol() -> Self {
        1e-5
    }
}

/// Sum of the `floor(budget)` largest magnitudes plus the fractional part of
/// the budget times the next largest magnitude.
///
/// This is the worst case of `sum_n xi_n * c_n` over
/// `{ |xi_n| <= 1, sum |xi_n| <= budget }`.
pub fn budgeted_worst_case<T: Real>(impacts: &[T], budget: T) -> T {
    if budget <= T::zero() || impacts.is_empty() {
        return T::zero();
    }
    let mut mags: Vec<T> = impacts.iter().map(|c| c.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let full = budget.floor();
    let frac = budget - full;
    let whole = full.to_usize().unwrap_or(usize::MAX).min(mags.len());
    let mut total = T::zero();
    for m in &mags[..whole] {
        total += *m;
    }
    if whole < mags.len() {
        total += frac * mags[whole];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_sum_integer_and_fractional() {
        let c = [5.0_f64, -3.0, 2.0];
        assert_eq!(budgeted_worst_case(&c, 0.0), 0.0);
        assert_eq!(budgeted_worst_case(&c, 2.0), 8.0);
        assert_eq!(budgeted_worst_case(&c, 1.5), 6.5);
        assert_eq!(budgeted_worst_case(&c, 3.0), 10.0);
        assert_eq!(budgeted_worst_case(&c, 7.0), 10.0);
        assert_eq!(budgeted_worst_case(&[5.0_f32, 3.0, 2.0], 2.0), 8.0);
    }
}
