//! Continuation solver for the Dirichlet problem `Q(D^2 Phi) = f`.
//!
//! The march starts from the exact solution of the barrier problem at
//! `s = 0` and follows the family `(1-s) Q(D^2 Phi_{-a}) + s f` up to the
//! target equation at `s = 1`, correcting at each stage with damped Newton
//! steps. The damping criterion is the one the continuity argument needs:
//! a step is accepted only if the trial iterate stays elliptic and the
//! residual drops.

use std::time::Instant;

use thiserror::Error;

use crate::grid::{Field, GridSpec, SpatialField};
use crate::linsolve::{self, CsrMatrix, LinSolveError, LinearMethod};
use crate::operator::{
    barrier, ellipticity_check, eval_q, BarrierSpec, EllipticityReport, OperatorError,
};
use crate::verify::VerificationSummary;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("right-hand side must be positive everywhere, min = {min}")]
    NonpositiveRhs { min: f64 },
    #[error("invalid boundary data or iterate: {0}")]
    InvalidBoundaryData(#[from] OperatorError),
    #[error("initial iterate fails the ellipticity check: {0:?}")]
    InvalidInitialIterate(EllipticityReport),
    #[error("Newton did not converge in {iters} iterations (last residual {last:e})")]
    NoConvergence { iters: usize, last: f64, residuals: Vec<f64> },
    #[error("line search stalled at damping {lambda:e} (residual {last:e})")]
    LineSearchStalled { lambda: f64, last: f64, residuals: Vec<f64> },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(#[from] LinSolveError),
    #[error("continuation stalled at s = {last_s} with step {ds:e}")]
    ContinuationStalled { last_s: f64, ds: f64, iterate: Box<Field>, source: Box<SolverError> },
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
}

/// Continuation and Newton parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative sup-norm residual target: converged when
    /// `||Q(Phi) - rhs||_inf <= newton_tol * (1 + ||rhs||_inf)`.
    pub newton_tol: f64,
    /// Newton iteration budget per continuation stage.
    pub max_newton_iters: usize,
    /// Initial continuation step.
    pub ds_init: f64,
    /// Smallest continuation step before giving up.
    pub ds_min: f64,
    /// Backtracking factor for the damped line search.
    pub damping_factor: f64,
    /// Backtracking budget per Newton step.
    pub max_backtracks: usize,
    /// Interior-unknown count up to which the sparse direct factorization is
    /// used; larger systems go to preconditioned BiCGSTAB.
    pub direct_max_unknowns: usize,
    /// Krylov relative tolerance as a fraction of `newton_tol`.
    pub krylov_tol_factor: f64,
    /// Fixed barrier amplitude `a`; `None` selects it from the data.
    pub barrier_amplitude: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            max_newton_iters: 30,
            ds_init: 0.1,
            ds_min: 1e-4,
            damping_factor: 0.5,
            max_backtracks: 40,
            direct_max_unknowns: 20_000,
            krylov_tol_factor: 1e-2,
            barrier_amplitude: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::BadConfig(msg.into()));
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        if !(self.ds_init > 0.0) || !(self.ds_min > 0.0) {
            return bad("continuation steps must be positive");
        }
        if self.ds_min > self.ds_init {
            return bad("ds_min must not exceed ds_init");
        }
        if !(self.damping_factor > 0.0 && self.damping_factor < 1.0) {
            return bad("damping factor must lie in (0, 1)");
        }
        if !(self.krylov_tol_factor > 0.0) {
            return bad("krylov_tol_factor must be positive");
        }
        Ok(())
    }
}

/// Diagnostics for one accepted continuation stage.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub s: f64,
    pub newton_iters: usize,
    /// Residual sup-norms, starting with the warm-start residual.
    pub residuals: Vec<f64>,
    pub backtracks: usize,
    pub ellipticity: EllipticityReport,
    pub linear_method: LinearMethod,
}

/// Full diagnostics of one continuation solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub steps: Vec<StepRecord>,
    pub barrier_amplitude: f64,
    pub final_residual: f64,
    pub wall_time_s: f64,
    /// Filled by the verification layer after the solve.
    pub verification: Option<VerificationSummary>,
}

impl SolveReport {
    pub fn accepted_s(&self) -> Vec<f64> {
        self.steps.iter().map(|r| r.s).collect()
    }

    pub fn newton_iters_total(&self) -> usize {
        self.steps.iter().map(|r| r.newton_iters).sum()
    }
}

impl std::fmt::Display for SolveReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "barrier_amplitude: {:.17e}", self.barrier_amplitude)?;
        writeln!(f, "continuation_steps: {}", self.steps.len())?;
        let s_list: Vec<String> = self.steps.iter().map(|r| format!("{}", r.s)).collect();
        writeln!(f, "accepted_s: {}", s_list.join(" "))?;
        writeln!(f, "newton_iters_total: {}", self.newton_iters_total())?;
        writeln!(f, "final_residual: {:e}", self.final_residual)?;
        writeln!(f, "wall_time_s: {}", self.wall_time_s)?;
        for r in &self.steps {
            let residuals: Vec<String> = r.residuals.iter().map(|v| format!("{v:e}")).collect();
            writeln!(
                f,
                "step s={} iters={} backtracks={} linear={} residuals: {}",
                r.s,
                r.newton_iters,
                r.backtracks,
                r.linear_method,
                residuals.join(" ")
            )?;
            writeln!(
                f,
                "  ellipticity: min_phi_tt={:e} min_one_plus_lap={:e} min_q={:e}",
                r.ellipticity.min_phi_tt, r.ellipticity.min_one_plus_lap, r.ellipticity.min_q
            )?;
        }
        if let Some(v) = &self.verification {
            writeln!(f, "verification:")?;
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Sup norm over the interior time levels.
pub fn interior_sup(field: &Field) -> f64 {
    let grid = field.grid();
    let range = grid.idx(1, 0)..grid.idx(grid.nt() - 1, 0);
    field.values()[range].iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn interior_sup_diff(a: &Field, b: &Field) -> f64 {
    let grid = a.grid();
    let range = grid.idx(1, 0)..grid.idx(grid.nt() - 1, 0);
    a.values()[range.clone()]
        .iter()
        .zip(&b.values()[range])
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Barrier amplitude that makes `Q(D^2 Phi_{-a})` at least `max f + 1` at
/// every grid point:
/// `a = (max f + 1 + max |grad(phi1 - phi0)|^2) / (2 min(1 + (1-t) lap phi0 + t lap phi1))`.
pub fn choose_barrier_a(
    f: &Field,
    phi0: &SpatialField,
    phi1: &SpatialField,
) -> Result<f64, SolverError> {
    let grid = f.grid();
    let f_min = f.values().iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if !(f_min > 0.0) {
        return Err(SolverError::NonpositiveRhs { min: f_min });
    }
    let f_max = f.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));

    // max over the spatial grid of |grad(phi1 - phi0)|^2
    let diff = SpatialField::from_values(
        phi0.grid(),
        phi1.values().iter().zip(phi0.values()).map(|(a, b)| a - b).collect(),
    )
    .expect("difference of valid fields is valid");
    let grads = diff.grad_x();
    let mut grad_sq_max = 0.0f64;
    for s in 0..grid.spatial_len() {
        let mut acc = 0.0;
        for g in &grads {
            acc += g.values()[s] * g.values()[s];
        }
        grad_sq_max = grad_sq_max.max(acc);
    }

    // min over the space-time grid of the interpolated H-margin
    let lap0 = phi0.laplacian();
    let lap1 = phi1.laplacian();
    let mut margin_min = f64::INFINITY;
    for k in 0..grid.nt() {
        let t = grid.t(k);
        for s in 0..grid.spatial_len() {
            let v = 1.0 + (1.0 - t) * lap0.values()[s] + t * lap1.values()[s];
            margin_min = margin_min.min(v);
        }
    }
    if !(margin_min > 0.0) {
        return Err(SolverError::InvalidBoundaryData(OperatorError::NotInH(margin_min)));
    }
    Ok((f_max + 1.0 + grad_sq_max) / (2.0 * margin_min))
}

/// The continuity-family right-hand side `(1-s) q_barrier + s f`.
pub fn continuation_rhs(s: f64, f: &Field, q_barrier: &Field) -> Field {
    q_barrier.lin_comb(1.0 - s, s, f)
}

fn solve_linear(
    mat: &CsrMatrix,
    rhs: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, LinearMethod), LinSolveError> {
    if mat.nrows() <= cfg.direct_max_unknowns {
        Ok((linsolve::solve_direct(mat, rhs)?, LinearMethod::SparseLu))
    } else {
        let tol = cfg.krylov_tol_factor * cfg.newton_tol;
        Ok((linsolve::solve_bicgstab(mat, rhs, tol, 5000)?, LinearMethod::BiCgStab))
    }
}

struct NewtonOutcome {
    phi: Field,
    iters: usize,
    residuals: Vec<f64>,
    backtracks: usize,
    ellipticity: EllipticityReport,
    linear_method: LinearMethod,
}

/// Damped Newton iteration for `Q(D^2 Phi) = rhs` at fixed continuation
/// stage. The update solves `dQ(Phi) delta = rhs - Q(D^2 Phi)` on the
/// interior unknowns and backtracks until the trial iterate stays elliptic
/// and reduces the residual.
pub fn newton_solve_at_s(
    phi_init: &Field,
    rhs: &Field,
    cfg: &SolverConfig,
) -> Result<(Field, usize), SolverError> {
    let out = newton_iterate(phi_init, rhs, cfg)?;
    Ok((out.phi, out.iters))
}

fn newton_iterate(
    phi_init: &Field,
    rhs: &Field,
    cfg: &SolverConfig,
) -> Result<NewtonOutcome, SolverError> {
    let grid = phi_init.grid();
    let mut ellipticity = ellipticity_check(phi_init);
    if !ellipticity.pass {
        return Err(SolverError::InvalidInitialIterate(ellipticity));
    }
    let tol_abs = cfg.newton_tol * (1.0 + interior_sup(rhs));
    let mut phi = phi_init.clone();
    let mut q_phi = eval_q(&phi);
    let mut res = interior_sup_diff(&q_phi, rhs);
    let mut residuals = vec![res];
    let mut backtracks_total = 0usize;
    let mut linear_method = LinearMethod::SparseLu;
    let m = grid.spatial_len();

    for iter in 0..=cfg.max_newton_iters {
        if res <= tol_abs {
            return Ok(NewtonOutcome {
                phi,
                iters: iter,
                residuals,
                backtracks: backtracks_total,
                ellipticity,
                linear_method,
            });
        }
        if iter == cfg.max_newton_iters {
            break;
        }
        let mat = assemble_checked(&phi)?;
        let mut rhs_vec = vec![0.0; grid.interior_len()];
        for k in 1..grid.nt() - 1 {
            for s in 0..m {
                rhs_vec[(k - 1) * m + s] = rhs.at(k, s) - q_phi.at(k, s);
            }
        }
        let (delta, method) = solve_linear(&mat, &rhs_vec, cfg)?;
        linear_method = method;

        let mut lambda = 1.0f64;
        let mut accepted = false;
        for _ in 0..=cfg.max_backtracks {
            let mut trial = phi.clone();
            for k in 1..grid.nt() - 1 {
                for s in 0..m {
                    trial.values_mut()[grid.idx(k, s)] += lambda * delta[(k - 1) * m + s];
                }
            }
            let trial_rep = ellipticity_check(&trial);
            let q_trial = eval_q(&trial);
            let res_trial = interior_sup_diff(&q_trial, rhs);
            if trial_rep.pass && (res_trial < res || res_trial <= tol_abs) {
                phi = trial;
                q_phi = q_trial;
                res = res_trial;
                ellipticity = trial_rep;
                residuals.push(res);
                accepted = true;
                break;
            }
            backtracks_total += 1;
            lambda *= cfg.damping_factor;
        }
        if !accepted {
            return Err(SolverError::LineSearchStalled { lambda, last: res, residuals });
        }
    }
    Err(SolverError::NoConvergence { iters: cfg.max_newton_iters, last: res, residuals })
}

fn assemble_checked(phi: &Field) -> Result<CsrMatrix, SolverError> {
    crate::operator::assemble_dq(phi).map_err(SolverError::InvalidBoundaryData)
}

/// Solve the Dirichlet problem by marching the continuity family from the
/// barrier solution to the target right-hand side.
pub fn solve_continuation(
    f: &Field,
    phi0: &SpatialField,
    phi1: &SpatialField,
    cfg: &SolverConfig,
) -> Result<(Field, SolveReport), SolverError> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = f.grid();
    assert_eq!(grid, phi0.grid(), "fields live on different grids");
    assert_eq!(grid, phi1.grid(), "fields live on different grids");

    let a = match cfg.barrier_amplitude {
        Some(a) => {
            // Still reject nonpositive data so errors stay uniform.
            let f_min = f.values().iter().fold(f64::INFINITY, |m, v| m.min(*v));
            if !(f_min > 0.0) {
                return Err(SolverError::NonpositiveRhs { min: f_min });
            }
            a
        }
        None => choose_barrier_a(f, phi0, phi1)?,
    };
    let spec = BarrierSpec::new(-a, phi0.clone(), phi1.clone())?;
    let mut phi = barrier(&spec);
    let q_barrier = eval_q(&phi);

    let initial = ellipticity_check(&phi);
    if !initial.pass {
        return Err(SolverError::InvalidInitialIterate(initial));
    }

    let mut steps = Vec::new();
    // The s = 0 stage is exact by construction; record its residual as the
    // warm-start certificate.
    let rhs0 = continuation_rhs(0.0, f, &q_barrier);
    steps.push(StepRecord {
        s: 0.0,
        newton_iters: 0,
        residuals: vec![interior_sup_diff(&eval_q(&phi), &rhs0)],
        backtracks: 0,
        ellipticity: initial,
        linear_method: LinearMethod::SparseLu,
    });

    let mut s = 0.0f64;
    let mut ds = cfg.ds_init;
    let mut streak = 0usize;
    while s < 1.0 {
        let s_try = (s + ds).min(1.0);
        let rhs = continuation_rhs(s_try, f, &q_barrier);
        match newton_iterate(&phi, &rhs, cfg) {
            Ok(out) => {
                phi = out.phi;
                s = s_try;
                steps.push(StepRecord {
                    s,
                    newton_iters: out.iters,
                    residuals: out.residuals,
                    backtracks: out.backtracks,
                    ellipticity: out.ellipticity,
                    linear_method: out.linear_method,
                });
                streak += 1;
                if streak >= 3 {
                    ds = (ds * 1.5).min(0.25);
                    streak = 0;
                }
            }
            Err(e) => {
                streak = 0;
                if ds <= cfg.ds_min {
                    return Err(SolverError::ContinuationStalled {
                        last_s: s,
                        ds,
                        iterate: Box::new(phi),
                        source: Box::new(e),
                    });
                }
                ds = (ds * 0.5).max(cfg.ds_min);
            }
        }
    }

    let final_residual = interior_sup_diff(&eval_q(&phi), f);
    let report = SolveReport {
        steps,
        barrier_amplitude: a,
        final_residual,
        wall_time_s: start.elapsed().as_secs_f64(),
        verification: None,
    };
    Ok((phi, report))
}

/// Grid helper shared by callers building constant right-hand sides.
pub fn constant_rhs(grid: GridSpec, value: f64) -> Field {
    Field::from_fn(grid, |_, _| value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn grid_1d(nx: usize, nt: usize) -> GridSpec {
        GridSpec::standard(1, nx, nt).unwrap()
    }

    fn exact_homogeneous(grid: GridSpec) -> Field {
        Field::from_fn(grid, |t, _| t * t - t)
    }

    #[test]
    fn barrier_amplitude_examples() {
        let g = grid_1d(16, 9);
        let f = constant_rhs(g, 2.0);
        let zero = SpatialField::zeros(g);
        let a = choose_barrier_a(&f, &zero, &zero).unwrap();
        assert!((a - 1.5).abs() < 1e-14);

        let f_small = constant_rhs(g, 1e-9);
        let a = choose_barrier_a(&f_small, &zero, &zero).unwrap();
        assert!((a - 0.5).abs() < 1e-9);
    }

    #[test]
    fn barrier_amplitude_guarantee() {
        // Q(Phi_{-a}) >= max f + 1 pointwise, by construction of a.
        let g = grid_1d(16, 11);
        let f = Field::from_fn(g, |t, x| 0.5 + 0.3 * (x[0] + t).sin().powi(2));
        let phi0 = SpatialField::from_fn(g, |x| 0.2 * x[0].cos());
        let phi1 = SpatialField::from_fn(g, |x| -0.15 * (2.0 * x[0]).sin());
        let a = choose_barrier_a(&f, &phi0, &phi1).unwrap();
        let spec = BarrierSpec::new(-a, phi0, phi1).unwrap();
        let q = eval_q(&barrier(&spec));
        let f_max = f.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        for k in 1..g.nt() - 1 {
            for s in 0..g.spatial_len() {
                assert!(q.at(k, s) >= f_max + 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn barrier_amplitude_rejects_bad_inputs() {
        let g = grid_1d(16, 5);
        let zero = SpatialField::zeros(g);
        let f_bad = constant_rhs(g, -1.0);
        assert!(matches!(
            choose_barrier_a(&f_bad, &zero, &zero),
            Err(SolverError::NonpositiveRhs { .. })
        ));
    }

    #[test]
    fn continuation_rhs_endpoints() {
        let g = grid_1d(8, 5);
        let f = constant_rhs(g, 2.0);
        let qb = constant_rhs(g, 4.0);
        let r0 = continuation_rhs(0.0, &f, &qb);
        let r1 = continuation_rhs(1.0, &f, &qb);
        let rh = continuation_rhs(0.5, &f, &qb);
        assert_eq!(r0.sup_distance(&qb), 0.0);
        assert_eq!(r1.sup_distance(&f), 0.0);
        assert!((rh.at(2, 3) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn newton_solves_homogeneous_problem() {
        let g = grid_1d(16, 17);
        let zero = SpatialField::zeros(g);
        let spec = BarrierSpec::new(-1.5, zero.clone(), zero).unwrap();
        let start = barrier(&spec);
        let rhs = constant_rhs(g, 2.0);
        let cfg = SolverConfig::default();
        let (phi, iters) = newton_solve_at_s(&start, &rhs, &cfg).unwrap();
        assert!(iters <= 3, "took {iters} iterations");
        let exact = exact_homogeneous(g);
        assert!(phi.sup_distance(&exact) <= 1e-10);
    }

    #[test]
    fn newton_fixed_point_returns_immediately() {
        let g = grid_1d(12, 9);
        let zero = SpatialField::zeros(g);
        let spec = BarrierSpec::new(-2.0, zero.clone(), zero).unwrap();
        let start = barrier(&spec);
        let rhs = eval_q(&start);
        let cfg = SolverConfig::default();
        let (phi, iters) = newton_solve_at_s(&start, &rhs, &cfg).unwrap();
        assert!(iters <= 1);
        assert_eq!(phi.sup_distance(&start), 0.0);
    }

    #[test]
    fn continuation_solves_homogeneous_problem() {
        let g = grid_1d(32, 33);
        let zero = SpatialField::zeros(g);
        let f = constant_rhs(g, 2.0);
        let cfg = SolverConfig::default();
        let (phi, report) = solve_continuation(&f, &zero, &zero, &cfg).unwrap();
        assert!(phi.sup_distance(&exact_homogeneous(g)) <= 1e-10);
        assert!((report.barrier_amplitude - 1.5).abs() < 1e-13);
        let s = report.accepted_s();
        assert_eq!(*s.last().unwrap(), 1.0);
        // Warm start: the s = 0 record certifies the barrier solves exactly.
        assert!(report.steps[0].residuals[0] <= 1e-12);
        for step in &report.steps {
            assert!(step.ellipticity.pass);
            assert!(*step.residuals.last().unwrap() <= cfg.newton_tol * 4.0);
        }
        // Residual certificate.
        let recomputed = interior_sup(&eval_q(&phi).lin_comb(1.0, -1.0, &f));
        assert!((recomputed - report.final_residual).abs() <= 1e-14);
    }

    #[test]
    fn continuation_step_schedule_grows_after_three_successes() {
        let g = grid_1d(8, 9);
        let zero = SpatialField::zeros(g);
        let f = constant_rhs(g, 2.0);
        let (_, report) = solve_continuation(&f, &zero, &zero, &SolverConfig::default()).unwrap();
        let expect = [0.0, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75, 0.975, 1.0];
        let got = report.accepted_s();
        assert_eq!(got.len(), expect.len(), "{got:?}");
        for (a, b) in got.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn continuation_solves_three_dimensional_problem() {
        let g = GridSpec::standard(3, 4, 5).unwrap();
        let zero = SpatialField::zeros(g);
        let f = constant_rhs(g, 2.0);
        let (phi, report) = solve_continuation(&f, &zero, &zero, &SolverConfig::default()).unwrap();
        let exact = Field::from_fn(g, |t, _| t * t - t);
        assert!(phi.sup_distance(&exact) <= 1e-10);
        assert!(report.steps.iter().all(|s| s.ellipticity.pass));
    }

    #[test]
    fn continuation_with_trig_endpoint() {
        let g = grid_1d(16, 17);
        let zero = SpatialField::zeros(g);
        let phi1 = SpatialField::from_fn(g, |x| 0.3 * x[0].cos());
        let f = constant_rhs(g, 0.01);
        let cfg = SolverConfig::default();
        let (phi, report) = solve_continuation(&f, &zero, &phi1, &cfg).unwrap();
        assert!(report.final_residual <= cfg.newton_tol * (1.0 + 0.01));
        assert!(ellipticity_check(&phi).pass);
        // Barrier sandwich, checked directly here, formally in verify.
        let spec = BarrierSpec::new(-report.barrier_amplitude, zero, phi1).unwrap();
        let lower = barrier(&spec);
        let upper = barrier(&spec.with_amplitude(0.0));
        for (i, v) in phi.values().iter().enumerate() {
            assert!(*v >= lower.values()[i] - 1e-8);
            assert!(*v <= upper.values()[i] + 1e-8);
        }
    }

    #[test]
    fn uniqueness_between_barrier_amplitudes() {
        let g = grid_1d(16, 17);
        let zero = SpatialField::zeros(g);
        let f = constant_rhs(g, 2.0);
        let base = SolverConfig::default();
        let (phi_a, report) = solve_continuation(&f, &zero, &zero, &base).unwrap();
        let mut bumped = base.clone();
        bumped.barrier_amplitude = Some(report.barrier_amplitude + 1.0);
        let (phi_b, _) = solve_continuation(&f, &zero, &zero, &bumped).unwrap();
        assert!(phi_a.sup_distance(&phi_b) <= 10.0 * base.newton_tol);
    }

    #[test]
    fn krylov_path_matches_direct_path() {
        // Forcing every linear solve through BiCGSTAB must not cost accuracy
        // beyond the Newton tolerance.
        let g = grid_1d(16, 17);
        let zero = SpatialField::zeros(g);
        let phi1 = SpatialField::from_fn(g, |x| 0.3 * x[0].cos());
        let f = constant_rhs(g, 0.01);
        let direct_cfg = SolverConfig::default();
        let mut krylov_cfg = SolverConfig::default();
        krylov_cfg.direct_max_unknowns = 0;
        let (phi_direct, _) = solve_continuation(&f, &zero, &phi1, &direct_cfg).unwrap();
        let (phi_krylov, report) = solve_continuation(&f, &zero, &phi1, &krylov_cfg).unwrap();
        assert!(report
            .steps
            .iter()
            .skip(1)
            .all(|s| s.linear_method == LinearMethod::BiCgStab));
        assert!(phi_direct.sup_distance(&phi_krylov) <= 10.0 * direct_cfg.newton_tol);

        let exact_f = constant_rhs(g, 2.0);
        let (phi, _) = solve_continuation(&exact_f, &zero, &zero, &krylov_cfg).unwrap();
        assert!(phi.sup_distance(&exact_homogeneous(g)) <= 1e-10);
    }

    #[test]
    fn monotone_comparison_in_f() {
        let g = grid_1d(12, 13);
        let zero = SpatialField::zeros(g);
        let f = constant_rhs(g, 2.0);
        let f_big = Field::from_fn(g, |_, x| 2.0 + 0.5 * (1.0 + x[0].cos()));
        let cfg = SolverConfig::default();
        let (phi, _) = solve_continuation(&f, &zero, &zero, &cfg).unwrap();
        let (phi_big, _) = solve_continuation(&f_big, &zero, &zero, &cfg).unwrap();
        for (small, big) in phi.values().iter().zip(phi_big.values()) {
            assert!(*big <= *small + 1e-8);
        }
    }

    #[test]
    fn continuation_rejects_bad_data() {
        let g = grid_1d(16, 9);
        let zero = SpatialField::zeros(g);
        let f_bad = constant_rhs(g, -1.0);
        assert!(matches!(
            solve_continuation(&f_bad, &zero, &zero, &SolverConfig::default()),
            Err(SolverError::NonpositiveRhs { .. })
        ));
        let outside = SpatialField::from_fn(g, |x| 2.0 * x[0].cos());
        let f = constant_rhs(g, 1.0);
        assert!(matches!(
            solve_continuation(&f, &zero, &outside, &SolverConfig::default()),
            Err(SolverError::InvalidBoundaryData(_))
        ));
    }

    #[test]
    fn continuation_stall_surfaces_last_iterate() {
        let g = grid_1d(8, 9);
        let zero = SpatialField::zeros(g);
        let f = constant_rhs(g, 2.0);
        let mut cfg = SolverConfig::default();
        cfg.max_newton_iters = 0; // every stage fails, ds collapses
        cfg.ds_min = 0.05;
        match solve_continuation(&f, &zero, &zero, &cfg) {
            Err(SolverError::ContinuationStalled { last_s, iterate, .. }) => {
                assert_eq!(last_s, 0.0);
                assert!(ellipticity_check(&iterate).pass);
            }
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::default();
        cfg.damping_factor = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.newton_tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::default();
        cfg.ds_min = 1.0;
        cfg.ds_init = 0.1;
        assert!(cfg.validate().is_err());
    }
}
