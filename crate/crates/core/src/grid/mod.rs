//! Grid-operator side: DC network sensitivities, the AIDC-free baseline
//! dispatch, budget-set protection terms and the per-step robust acceptance
//! problem.

mod acceptance;
mod baseline;
mod protection;
mod ptdf;
mod robust_check;

pub use acceptance::{
    robust_acceptance_step, solve_step_variant, zero_curtailment_feasible, AcceptanceDiagnostics,
    AcceptanceOutcome, Mechanism, StepSolution, StepVariant, TsoContext, TsoState, KAPPA_TOL,
};
pub use baseline::{
    baseline_full_lp, baseline_violation, solve_baseline_dispatch, solve_baseline_with,
    step_flows, BaselineDispatch, BaselineOptions,
};
pub use protection::{line_impacts, participation_factors, protection_terms, ProtectionTerms};
pub use ptdf::{compute_ptdf, PtdfMatrix};
pub use robust_check::{budget_vertices, check_robust_feasibility, RobustReport, VERTEX_CAP};

use crate::linalg::SingularMatrix;
use crate::lp::{LpError, LpStatus};

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("reduced susceptance matrix is singular: {0}")]
    Singular(#[from] SingularMatrix),
    #[error("topology: {0}")]
    Topology(String),
    #[error("baseline dispatch infeasible from step {first_step} (window {}..{}): {detail}", window.0, window.1)]
    BaselineInfeasible {
        first_step: usize,
        window: (usize, usize),
        detail: String,
    },
    #[error("acceptance problem infeasible at step {t}: {detail}")]
    AcceptanceInfeasible { t: usize, detail: String },
    #[error("{context}: solver returned {status:?} {}", detail.as_deref().unwrap_or(""))]
    Solver {
        context: String,
        status: LpStatus,
        detail: Option<String>,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("uncertainty set has {count} vertices, above the cap of {cap}")]
    TooManyVertices { count: f64, cap: usize },
}
