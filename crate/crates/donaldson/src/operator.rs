//! The Donaldson operator `Q(D^2 Phi) = Phi_tt (1 + lap Phi) - |grad Phi_t|^2`,
//! its linearization, barrier fields, and the matrix-level form of Q.
//!
//! Q and dQ act at interior time levels only; the boundary levels carry
//! Dirichlet data and are set to zero in every residual-like field, which
//! keeps the Newton systems square.

use thiserror::Error;

use crate::grid::{Field, GridSpec, SpatialField, MAX_DIM};
use crate::linsolve::CsrMatrix;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("matrix must be symmetric within {tol:e}: |a[{i}][{j}] - a[{j}][{i}]| = {defect:e}")]
    NotSymmetric { i: usize, j: usize, defect: f64, tol: f64 },
    #[error("matrix size must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("boundary slice is not in H: min(1 + lap phi) = {0} <= 0")]
    NotInH(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(
        "field is not elliptic: min Phi_tt = {min_phi_tt}, min(1 + lap Phi) = {min_one_plus_lap}, min Q = {min_q}"
    )]
    NotElliptic { min_phi_tt: f64, min_one_plus_lap: f64, min_q: f64 },
}

/// Interpolating barrier data: amplitude `a` and the two Dirichlet slices.
///
/// The barrier field is `a t(1-t) + (1-t) phi0 + t phi1`; the comparison
/// argument uses it with a negative amplitude as a subsolution.
#[derive(Debug, Clone)]
pub struct BarrierSpec {
    a: f64,
    phi0: SpatialField,
    phi1: SpatialField,
}

impl BarrierSpec {
    /// Both endpoints must lie in H (discretely: `1 + lap phi > 0` at every
    /// grid point).
    pub fn new(a: f64, phi0: SpatialField, phi1: SpatialField) -> Result<Self, OperatorError> {
        if phi0.grid() != phi1.grid() {
            return Err(OperatorError::GridMismatch);
        }
        check_membership_in_h(&phi0)?;
        check_membership_in_h(&phi1)?;
        Ok(Self { a, phi0, phi1 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn phi0(&self) -> &SpatialField {
        &self.phi0
    }

    pub fn phi1(&self) -> &SpatialField {
        &self.phi1
    }

    pub fn with_amplitude(&self, a: f64) -> Self {
        Self { a, phi0: self.phi0.clone(), phi1: self.phi1.clone() }
    }

    pub fn grid(&self) -> GridSpec {
        self.phi0.grid()
    }
}

/// Discrete membership in H.
pub fn check_membership_in_h(phi: &SpatialField) -> Result<(), OperatorError> {
    let lap = phi.laplacian();
    let min = lap.values().iter().fold(f64::INFINITY, |m, &v| {
        if v.is_nan() {
            f64::NAN
        } else {
            m.min(v)
        }
    });
    if 1.0 + min > 0.0 {
        Ok(())
    } else {
        Err(OperatorError::NotInH(1.0 + min))
    }
}

/// The three pointwise minima the continuity method must keep positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticityReport {
    /// Minimum of `Phi_tt` over interior time levels.
    pub min_phi_tt: f64,
    /// Minimum of `1 + lap Phi` over all time levels, boundary included.
    pub min_one_plus_lap: f64,
    /// Minimum of `Q(D^2 Phi)` over interior time levels.
    pub min_q: f64,
    pub pass: bool,
}

fn nan_aware_min(values: impl Iterator<Item = f64>) -> f64 {
    let mut min = f64::INFINITY;
    for v in values {
        if v.is_nan() {
            return f64::NAN;
        }
        min = min.min(v);
    }
    min
}

/// Evaluate `Q(D^2 phi)` with the grid's centered stencils. Interior time
/// levels only; boundary levels are 0.
pub fn eval_q(phi: &Field) -> Field {
    let grid = phi.grid();
    let phi_tt = phi.d_tt();
    let lap = phi.laplacian();
    let mixed = phi.grad_t_grad_x();
    let mut out = Field::zeros(grid);
    for k in 1..grid.nt() - 1 {
        for s in 0..grid.spatial_len() {
            let i = grid.idx(k, s);
            let mut grad_sq = 0.0;
            for comp in &mixed {
                let g = comp.values()[i];
                grad_sq += g * g;
            }
            out.values_mut()[i] = phi_tt.values()[i] * (1.0 + lap.values()[i]) - grad_sq;
        }
    }
    out
}

/// Evaluate the linearization about `phi`:
/// `dQ(h) = Phi_tt lap h + (1 + lap Phi) h_tt - 2 <grad h_t, grad Phi_t>`.
/// The boundary levels of `h` are treated as fixed Dirichlet data: they
/// contribute through the stencils but receive no residual of their own.
pub fn eval_dq(phi: &Field, h: &Field) -> Field {
    let grid = phi.grid();
    assert_eq!(grid, h.grid(), "fields live on different grids");
    let phi_tt = phi.d_tt();
    let phi_lap = phi.laplacian();
    let phi_mixed = phi.grad_t_grad_x();
    let h_tt = h.d_tt();
    let h_lap = h.laplacian();
    let h_mixed = h.grad_t_grad_x();
    let mut out = Field::zeros(grid);
    for k in 1..grid.nt() - 1 {
        for s in 0..grid.spatial_len() {
            let i = grid.idx(k, s);
            let mut cross = 0.0;
            for (pc, hc) in phi_mixed.iter().zip(&h_mixed) {
                cross += pc.values()[i] * hc.values()[i];
            }
            out.values_mut()[i] = phi_tt.values()[i] * h_lap.values()[i]
                + (1.0 + phi_lap.values()[i]) * h_tt.values()[i]
                - 2.0 * cross;
        }
    }
    out
}

/// Assemble `dQ` at `phi` as a sparse matrix over the interior unknowns.
///
/// Row and column `r` index the interior point `(k, s)` with
/// `r = (k - 1) * nx^dim + s` for time level `k` in `1..nt-1` (time-major).
/// For every `h` that vanishes on the time boundary, the product reproduces
/// [`eval_dq`] at the interior points. Requires `phi` to pass
/// [`ellipticity_check`]; callers are expected to have checked already.
pub fn assemble_dq(phi: &Field) -> Result<CsrMatrix, OperatorError> {
    let report = ellipticity_check(phi);
    if !report.pass {
        return Err(OperatorError::NotElliptic {
            min_phi_tt: report.min_phi_tt,
            min_one_plus_lap: report.min_one_plus_lap,
            min_q: report.min_q,
        });
    }
    let grid = phi.grid();
    let m = grid.spatial_len();
    let n_int = grid.interior_len();
    let phi_tt = phi.d_tt();
    let phi_lap = phi.laplacian();
    let phi_mixed = phi.grad_t_grad_x();
    let hx2 = grid.hx() * grid.hx();
    let ht2 = grid.ht() * grid.ht();
    let mixed_denom = 2.0 * grid.ht() * grid.hx();

    let interior = |k: usize, s: usize| -> Option<usize> {
        (k >= 1 && k + 1 < grid.nt()).then(|| (k - 1) * m + s)
    };

    let mut builder = CsrMatrix::builder(n_int, n_int);
    let mut row: Vec<(usize, f64)> = Vec::with_capacity(3 + 6 * grid.dim());
    for k in 1..grid.nt() - 1 {
        for s in 0..m {
            let i = grid.idx(k, s);
            let att = phi_tt.values()[i];
            let alap = 1.0 + phi_lap.values()[i];
            row.clear();
            row.push(((k - 1) * m + s, -2.0 * grid.dim() as f64 * att / hx2 - 2.0 * alap / ht2));
            for d in 0..grid.dim() {
                let sp = grid.shift(s, d, 1);
                let sm = grid.shift(s, d, -1);
                row.push(((k - 1) * m + sp, att / hx2));
                row.push(((k - 1) * m + sm, att / hx2));
                let c = phi_mixed[d].values()[i] / mixed_denom;
                if let Some(col) = interior(k + 1, sp) {
                    row.push((col, -c));
                }
                if let Some(col) = interior(k + 1, sm) {
                    row.push((col, c));
                }
                if let Some(col) = interior(k - 1, sp) {
                    row.push((col, c));
                }
                if let Some(col) = interior(k - 1, sm) {
                    row.push((col, -c));
                }
            }
            if let Some(col) = interior(k + 1, s) {
                row.push((col, alap / ht2));
            }
            if let Some(col) = interior(k - 1, s) {
                row.push((col, alap / ht2));
            }
            builder.push_row((k - 1) * m + s, &row);
        }
    }
    Ok(builder.build())
}

/// The barrier field `a t(1-t) + (1-t) phi0 + t phi1`. Equals the Dirichlet
/// slices exactly at `t = 0` and `t = 1`.
pub fn barrier(spec: &BarrierSpec) -> Field {
    let grid = spec.grid();
    let m = grid.spatial_len();
    let mut out = Field::zeros(grid);
    // Boundary slices are copied, not interpolated, so Dirichlet data is
    // preserved bit-exactly.
    out.values_mut()[..m].copy_from_slice(spec.phi0().values());
    out.values_mut()[(grid.nt() - 1) * m..].copy_from_slice(spec.phi1().values());
    for k in 1..grid.nt() - 1 {
        let t = grid.t(k);
        let bump = spec.a() * t * (1.0 - t);
        for s in 0..m {
            out.values_mut()[grid.idx(k, s)] =
                bump + (1.0 - t) * spec.phi0().values()[s] + t * spec.phi1().values()[s];
        }
    }
    out
}

/// Small symmetric matrix with the distinguished time slot at index 0.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    m: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub const SYMMETRY_TOL: f64 = 1e-14;

    pub fn new(m: usize, entries: Vec<f64>) -> Result<Self, OperatorError> {
        if m < 2 {
            return Err(OperatorError::TooSmall(m));
        }
        assert_eq!(entries.len(), m * m, "need a full m x m entry buffer");
        for i in 0..m {
            for j in i + 1..m {
                let defect = (entries[i * m + j] - entries[j * m + i]).abs();
                if !(defect <= Self::SYMMETRY_TOL) {
                    return Err(OperatorError::NotSymmetric {
                        i,
                        j,
                        defect,
                        tol: Self::SYMMETRY_TOL,
                    });
                }
            }
        }
        Ok(Self { m, entries })
    }

    /// Build from a generator over `(i, j)` with `i <= j`; the lower triangle
    /// mirrors the upper one exactly.
    pub fn from_upper(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = f(i, j);
                entries[i * m + j] = v;
                entries[j * m + i] = v;
            }
        }
        Self { m, entries }
    }

    pub fn identity(m: usize) -> Self {
        Self::from_upper(m, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    /// Entrywise `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.m, other.m, "matrix sizes differ");
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + alpha * b)
            .collect();
        SymMatrix { m: self.m, entries }
    }

    pub fn scale(&self, alpha: f64) -> SymMatrix {
        SymMatrix { m: self.m, entries: self.entries.iter().map(|v| alpha * v).collect() }
    }
}

/// Matrix-level Donaldson operator:
/// `Q(A) = A_00 * sum_{i>=1} A_ii - sum_{i>=1} A_0i^2`.
///
/// Only the time-time entry, the spatial diagonal, and the mixed column
/// enter; Q is 2-homogeneous in A.
pub fn matrix_q(a: &SymMatrix) -> f64 {
    let m = a.size();
    let mut diag = 0.0;
    let mut cross = 0.0;
    for i in 1..m {
        diag += a.at(i, i);
        cross += a.at(0, i) * a.at(0, i);
    }
    a.at(0, 0) * diag - cross
}

/// Compute the three ellipticity minima of `phi`.
pub fn ellipticity_check(phi: &Field) -> EllipticityReport {
    let grid = phi.grid();
    let phi_tt = phi.d_tt();
    let lap = phi.laplacian();
    let q = eval_q(phi);
    let interior = grid.idx(1, 0)..grid.idx(grid.nt() - 1, 0);
    let min_phi_tt = nan_aware_min(phi_tt.values()[interior.clone()].iter().copied());
    let min_q = nan_aware_min(q.values()[interior].iter().copied());
    let min_one_plus_lap = nan_aware_min(lap.values().iter().map(|v| 1.0 + v));
    EllipticityReport {
        min_phi_tt,
        min_one_plus_lap,
        min_q,
        pass: min_phi_tt > 0.0 && min_one_plus_lap > 0.0 && min_q > 0.0,
    }
}

/// Location of the worst (most violating) grid point: time level plus spatial
/// coordinates, for report output.
pub fn locate(grid: GridSpec, flat: usize) -> String {
    let m = grid.spatial_len();
    let k = flat / m;
    let s = flat % m;
    let mut coords = [0usize; MAX_DIM];
    grid.spatial_coords(s, &mut coords);
    let xs: Vec<String> = coords[..grid.dim()].iter().map(|c| c.to_string()).collect();
    format!("t={} x=({})", k, xs.join(" "))
}
