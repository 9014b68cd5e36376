//! Numerical solver and verification suite for the Donaldson equation
//! `Q(D^2 Phi) = Phi_tt (1 + lap Phi) - |grad Phi_t|^2 = f` with Dirichlet
//! data on flat tori, together with the induced geometry on the space of
//! volume forms (metric, energy, path length, epsilon-geodesics).
//!
//! The Dirichlet problem is solved by a continuity method: the barrier field
//! `Phi_{-a}` solves the `s = 0` member of the family
//! `Q = (1-s) Q(D^2 Phi_{-a}) + s f` exactly, and damped Newton steps carry
//! the solution to `s = 1` while preserving the discrete ellipticity margins
//! (`Phi_tt > 0`, `1 + lap Phi > 0`, `Q > 0`). The verification layer turns
//! the comparison bounds, maximum principles, concavity properties and
//! differentiated identities satisfied by solutions into executable checks.

pub mod geometry;
pub mod grid;
pub mod linsolve;
pub mod operator;
pub mod solver;
pub mod verify;

pub use geometry::{
    energy, eps_sweep, epsilon_geodesic, metric_norm_sq, path_length, speed_profile,
    GeodesicResult, GeometryError, PathInH, SweepTable,
};
pub use grid::{dnfd, Field, GridError, GridSpec, SpatialField};
pub use operator::{
    assemble_dq, barrier, ellipticity_check, eval_dq, eval_q, matrix_q, BarrierSpec,
    EllipticityReport, OperatorError, SymMatrix,
};
pub use solver::{
    choose_barrier_a, continuation_rhs, newton_solve_at_s, solve_continuation, SolveReport,
    SolverConfig, SolverError,
};
pub use verify::{
    check_c2_monitor, check_comparison_bounds, check_differentiated_identities,
    check_time_convexity, check_uniqueness, convergence_study, lemma_suites,
    BoundCheckReport, ConvergenceTable, ManufacturedCase, SuiteReport, VerificationSummary,
};

#[cfg(test)]
mod concurrency_contract {
    // Grid data, configs, assembled operators and reports cross thread
    // boundaries in concurrent sweeps.
    fn assert_send_sync<T: Send + Sync>() {}

    #[test]
    fn core_types_are_send_sync() {
        assert_send_sync::<crate::GridSpec>();
        assert_send_sync::<crate::Field>();
        assert_send_sync::<crate::SpatialField>();
        assert_send_sync::<crate::SolverConfig>();
        assert_send_sync::<crate::SolveReport>();
        assert_send_sync::<crate::linsolve::CsrMatrix>();
        assert_send_sync::<crate::GeodesicResult>();
        assert_send_sync::<crate::VerificationSummary>();
    }
}
