use crate::num::{budgeted_worst_case, Real};
use crate::scenario::{ExogenousTrace, NetworkCase, ParticipationRule, TsoConfig};

use super::PtdfMatrix;

/// Constraint tightening for the budget uncertainty set under
/// fixed-participation recourse.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectionTerms {
    /// Participation factors, generator order; nonnegative, summing to 1.
    pub alpha: Vec<f64>,
    /// `delta_f[t][l]`, MW.
    pub delta_f: Vec<Vec<f64>>,
    /// Worst-case total demand deviation per step, MW.
    pub delta_d: Vec<f64>,
}

impl ProtectionTerms {
    pub fn zeros(horizon: usize, n_lines: usize, alpha: Vec<f64>) -> Self {
        Self {
            alpha,
            delta_f: vec![vec![0.0; n_lines]; horizon],
            delta_d: vec![0.0; horizon],
        }
    }
}

pub fn participation_factors(case: &NetworkCase, rule: ParticipationRule) -> Vec<f64> {
    let raw: Vec<f64> = case
        .generators
        .iter()
        .map(|g| match rule {
            ParticipationRule::Headroom => (g.g_max_mw - g.g_min_mw).max(0.0),
            ParticipationRule::Capacity => g.g_max_mw.max(0.0),
            ParticipationRule::Uniform => 1.0,
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

/// Per-bus flow impact on line `l` of a unit normalized deviation:
/// `eps * d_n * (sum_i alpha_i PTDF[l][n_i] - PTDF[l][n])`.
pub fn line_impacts<T: Real>(
    ptdf: &PtdfMatrix<T>,
    alpha: &[T],
    gen_bus: &[usize],
    line: usize,
    bus_demand: &[T],
    eps: T,
) -> Vec<T> {
    let row = ptdf.row(line);
    let response = alpha
        .iter()
        .zip(gen_bus)
        .fold(T::zero(), |acc, (a, &n)| acc + *a * row[n]);
    bus_demand
        .iter()
        .zip(row)
        .map(|(d, p)| eps * *d * (response - *p))
        .collect()
}

pub fn protection_terms(
    ptdf: &PtdfMatrix<f64>,
    trace: &ExogenousTrace,
    tso: &TsoConfig,
    case: &NetworkCase,
) -> ProtectionTerms {
    let alpha = participation_factors(case, tso.participation);
    let horizon = trace.horizon();
    if tso.gamma_u <= 0.0 {
        return ProtectionTerms::zeros(horizon, ptdf.n_lines(), alpha);
    }
    let gen_bus = case.generator_bus_indices();
    let mut delta_f = Vec::with_capacity(horizon);
    let mut delta_d = Vec::with_capacity(horizon);
    for d in &trace.bus_demand {
        let row: Vec<f64> = (0..ptdf.n_lines())
            .map(|l| {
                let c = line_impacts(ptdf, &alpha, &gen_bus, l, d, tso.epsilon);
                budgeted_worst_case(&c, tso.gamma_u)
            })
            .collect();
        delta_f.push(row);
        let dev: Vec<f64> = d.iter().map(|v| tso.epsilon * v).collect();
        delta_d.push(budgeted_worst_case(&dev, tso.gamma_u));
    }
    ProtectionTerms {
        alpha,
        delta_f,
        delta_d,
    }
}
