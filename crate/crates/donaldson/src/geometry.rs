//! Geometry of the space of volume forms: the metric
//! `||dphi||^2 = int (dphi)^2 (1 + lap phi)`, path energy and length, and
//! epsilon-geodesics obtained by solving `Q(D^2 Phi) = eps`.

use thiserror::Error;

use crate::grid::{Field, GridSpec, SpatialField};
use crate::solver::{solve_continuation, SolveReport, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("field is not in H: min(1 + lap phi) = {0} <= 0")]
    NotInH(f64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("solver: {0}")]
    Solver(#[from] SolverError),
    #[error("fields live on different grids")]
    GridMismatch,
}

/// A space-time field read as a path `t -> Phi(., t)` whose every time slice
/// lies in H.
#[derive(Debug, Clone)]
pub struct PathInH {
    field: Field,
}

impl PathInH {
    pub fn new(field: Field) -> Result<Self, GeometryError> {
        let lap = field.laplacian();
        let mut min = f64::INFINITY;
        for v in lap.values() {
            if v.is_nan() {
                min = f64::NAN;
                break;
            }
            min = min.min(1.0 + v);
        }
        if !(min > 0.0) {
            return Err(GeometryError::NotInH(min));
        }
        Ok(Self { field })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn grid(&self) -> GridSpec {
        self.field.grid()
    }

    pub fn reverse(&self) -> PathInH {
        PathInH { field: self.field.reverse_time() }
    }
}

/// An epsilon-geodesic with its derived geometric quantities.
#[derive(Debug, Clone)]
pub struct GeodesicResult {
    pub path: PathInH,
    pub epsilon: f64,
    pub energy: f64,
    pub length: f64,
    /// `||Phi_t(., t)||^2_{Phi(., t)}` per time level.
    pub speed_profile: Vec<f64>,
    pub report: SolveReport,
}

impl GeodesicResult {
    /// Population standard deviation of the speed profile; zero for an exact
    /// constant-speed path.
    pub fn speed_std(&self) -> f64 {
        std_dev(&self.speed_profile)
    }
}

pub(crate) fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Squared metric norm of the tangent vector `dphi` at the point `phi`:
/// `int_X (dphi)^2 (1 + lap phi)`.
pub fn metric_norm_sq(phi: &SpatialField, dphi: &SpatialField) -> Result<f64, GeometryError> {
    if phi.grid() != dphi.grid() {
        return Err(GeometryError::GridMismatch);
    }
    let lap = phi.laplacian();
    let mut min = f64::INFINITY;
    let mut acc = 0.0;
    for (v, l) in dphi.values().iter().zip(lap.values()) {
        let weight = 1.0 + l;
        min = min.min(weight);
        acc += v * v * weight;
    }
    if !(min > 0.0) {
        return Err(GeometryError::NotInH(min));
    }
    Ok(acc * phi.grid().hx().powi(phi.grid().dim() as i32))
}

/// Per-level squared speed of the path; the time derivative is centered at
/// interior levels and one-sided second-order at the boundary levels.
pub fn speed_profile(path: &PathInH) -> Result<Vec<f64>, GeometryError> {
    let dphi = path.field().time_derivative();
    let grid = path.grid();
    (0..grid.nt())
        .map(|k| metric_norm_sq(&path.field().slice(k), &dphi.slice(k)))
        .collect()
}

/// Path energy `int_0^1 ||Phi_t||^2_Phi dt` by the trapezoid rule.
pub fn energy(path: &PathInH) -> Result<f64, GeometryError> {
    let speeds = speed_profile(path)?;
    Ok(path.grid().integrate_t(&speeds))
}

/// Path length `int_0^1 ||Phi_t||_Phi dt`.
pub fn path_length(path: &PathInH) -> Result<f64, GeometryError> {
    let speeds = speed_profile(path)?;
    let roots: Vec<f64> = speeds.iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(path.grid().integrate_t(&roots))
}

/// Solve the perturbed geodesic equation `Q(D^2 Phi) = eps` between the two
/// endpoints and package the geometric diagnostics.
pub fn epsilon_geodesic(
    phi0: &SpatialField,
    phi1: &SpatialField,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<GeodesicResult, GeometryError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(GeometryError::BadEpsilon(eps));
    }
    let grid = phi0.grid();
    let f = Field::from_fn(grid, |_, _| eps);
    let (field, report) = solve_continuation(&f, phi0, phi1, cfg)?;
    let path = PathInH::new(field)?;
    let speeds = speed_profile(&path)?;
    let energy = grid.integrate_t(&speeds);
    let roots: Vec<f64> = speeds.iter().map(|v| v.max(0.0).sqrt()).collect();
    let length = grid.integrate_t(&roots);
    Ok(GeodesicResult { path, epsilon: eps, energy, length, speed_profile: speeds, report })
}

/// One row of an epsilon sweep; failures are recorded without aborting the
/// remaining entries.
#[derive(Debug)]
pub struct SweepEntry {
    pub eps: f64,
    pub result: Result<GeodesicResult, GeometryError>,
    /// Sup distance to the previous successful entry's path.
    pub sup_distance_from_previous: Option<f64>,
}

#[derive(Debug, Default)]
pub struct SweepTable {
    pub entries: Vec<SweepEntry>,
}

impl SweepTable {
    pub fn all_converged(&self) -> bool {
        self.entries.iter().all(|e| e.result.is_ok())
    }

    /// CSV with one row per converged entry.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("eps,energy,length,speed_std,final_residual,newton_iters_total,wall_time_s\n");
        for entry in &self.entries {
            if let Ok(res) = &entry.result {
                out.push_str(&format!(
                    "{:e},{},{},{},{:e},{},{}\n",
                    entry.eps,
                    res.energy,
                    res.length,
                    res.speed_std(),
                    res.report.final_residual,
                    res.report.newton_iters_total(),
                    res.report.wall_time_s,
                ));
            }
        }
        out
    }
}

/// Decreasing-epsilon sweep of [`epsilon_geodesic`] with step-to-step
/// diagnostics.
pub fn eps_sweep(
    phi0: &SpatialField,
    phi1: &SpatialField,
    eps_list: &[f64],
    cfg: &SolverConfig,
) -> SweepTable {
    let mut table = SweepTable::default();
    let mut previous: Option<Field> = None;
    for &eps in eps_list {
        let result = epsilon_geodesic(phi0, phi1, eps, cfg);
        let sup_distance_from_previous = match (&result, &previous) {
            (Ok(res), Some(prev)) => Some(res.path.field().sup_distance(prev)),
            _ => None,
        };
        if let Ok(res) = &result {
            previous = Some(res.path.field().clone());
        }
        table.entries.push(SweepEntry { eps, result, sup_distance_from_previous });
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::{PI, TAU};

    fn grid_1d(nx: usize, nt: usize) -> GridSpec {
        GridSpec::standard(1, nx, nt).unwrap()
    }

    #[test]
    fn metric_norm_examples() {
        let g = grid_1d(16, 3);
        let zero = SpatialField::zeros(g);
        let one = SpatialField::from_fn(g, |_| 1.0);
        assert!((metric_norm_sq(&zero, &one).unwrap() - TAU).abs() < 1e-13);
        let cos = SpatialField::from_fn(g, |x| x[0].cos());
        assert!((metric_norm_sq(&zero, &cos).unwrap() - PI).abs() < 1e-12);
        assert_eq!(metric_norm_sq(&zero, &zero).unwrap(), 0.0);
        let outside = SpatialField::from_fn(g, |x| 2.0 * x[0].cos());
        assert!(matches!(metric_norm_sq(&outside, &one), Err(GeometryError::NotInH(_))));
    }

    #[test]
    fn energy_of_homogeneous_path() {
        let g = grid_1d(8, 101);
        let path = PathInH::new(Field::from_fn(g, |t, _| t * t - t)).unwrap();
        let e = energy(&path).unwrap();
        assert!((e - TAU / 3.0).abs() < 1e-3, "energy {e}");
        let constant = PathInH::new(Field::from_fn(g, |_, _| 0.7)).unwrap();
        assert!(energy(&constant).unwrap() <= 1e-28);
        // Phi = c t: speed is exactly c^2 Vol at every level.
        let c = 0.4;
        let linear = PathInH::new(Field::from_fn(g, |t, _| c * t)).unwrap();
        assert!((energy(&linear).unwrap() - c * c * TAU).abs() < 1e-13);
    }

    #[test]
    fn speed_profile_of_homogeneous_path() {
        let g = grid_1d(8, 101);
        let path = PathInH::new(Field::from_fn(g, |t, _| t * t - t)).unwrap();
        let speeds = speed_profile(&path).unwrap();
        for (k, v) in speeds.iter().enumerate() {
            let expect = (2.0 * g.t(k) - 1.0).powi(2) * TAU;
            assert!((v - expect).abs() < 1e-12, "level {k}");
        }
        // Midpoint level carries zero speed, endpoints 2 pi.
        assert!(speeds[50].abs() < 1e-12);
        assert!((speeds[0] - TAU).abs() < 1e-12);
        let len = path_length(&path).unwrap();
        let e = energy(&path).unwrap();
        assert!(len * len <= e * (1.0 + 1e-10));
    }

    #[test]
    fn energy_and_length_are_time_reversal_invariant() {
        let g = grid_1d(12, 21);
        let path = PathInH::new(Field::from_fn(g, |t, x| {
            t * t - t + 0.1 * x[0].cos() * (PI * t).sin() + 0.05 * t
        }))
        .unwrap();
        let rev = path.reverse();
        let (e, er) = (energy(&path).unwrap(), energy(&rev).unwrap());
        let (l, lr) = (path_length(&path).unwrap(), path_length(&rev).unwrap());
        assert!((e - er).abs() <= 1e-12 * e.max(1.0));
        assert!((l - lr).abs() <= 1e-12 * l.max(1.0));
    }

    #[test]
    fn geodesic_homogeneous_closed_form() {
        let g = grid_1d(8, 101);
        let zero = SpatialField::zeros(g);
        let cfg = SolverConfig::default();
        let res = epsilon_geodesic(&zero, &zero, 2.0, &cfg).unwrap();
        let exact = Field::from_fn(g, |t, _| t * t - t);
        assert!(res.path.field().sup_distance(&exact) <= 1e-9);
        assert!((res.energy - TAU / 3.0).abs() < 1e-3);
        assert!(res.length * res.length <= res.energy * (1.0 + 1e-10));
    }

    #[test]
    fn geodesic_epsilon_scaling() {
        // For zero endpoints the solution is exactly (eps/2) t(t-1).
        let g = grid_1d(8, 17);
        let zero = SpatialField::zeros(g);
        let cfg = SolverConfig::default();
        for eps in [1.0, 0.1, 0.01] {
            let res = epsilon_geodesic(&zero, &zero, eps, &cfg).unwrap();
            let exact = Field::from_fn(g, |t, _| 0.5 * eps * (t * t - t));
            assert!(
                res.path.field().sup_distance(&exact) <= 1e-9,
                "eps {eps}: {}",
                res.path.field().sup_distance(&exact)
            );
        }
    }

    #[test]
    fn geodesic_rejects_nonpositive_epsilon() {
        let g = grid_1d(8, 9);
        let zero = SpatialField::zeros(g);
        assert!(matches!(
            epsilon_geodesic(&zero, &zero, 0.0, &SolverConfig::default()),
            Err(GeometryError::BadEpsilon(_))
        ));
    }

    #[test]
    fn sweep_single_entry_matches_geodesic() {
        let g = grid_1d(8, 11);
        let zero = SpatialField::zeros(g);
        let cfg = SolverConfig::default();
        let table = eps_sweep(&zero, &zero, &[0.5], &cfg);
        assert_eq!(table.entries.len(), 1);
        let single = epsilon_geodesic(&zero, &zero, 0.5, &cfg).unwrap();
        let entry = table.entries[0].result.as_ref().unwrap();
        assert_eq!(entry.energy.to_bits(), single.energy.to_bits());
        assert_eq!(entry.length.to_bits(), single.length.to_bits());
        assert!(table.all_converged());
    }

    #[test]
    fn sweep_records_distances_and_speed_std() {
        let g = grid_1d(8, 17);
        let zero = SpatialField::zeros(g);
        let cfg = SolverConfig::default();
        let eps_list = [0.1, 0.01];
        let table = eps_sweep(&zero, &zero, &eps_list, &cfg);
        assert!(table.all_converged());
        assert!(table.entries[0].sup_distance_from_previous.is_none());
        let d = table.entries[1].sup_distance_from_previous.unwrap();
        // Exact homogeneous solutions differ by (0.09/2) max t(1-t).
        assert!((d - 0.045 * 0.25).abs() < 1e-9, "distance {d}");
        for entry in &table.entries {
            let res = entry.result.as_ref().unwrap();
            // Closed-form speed profile: ((eps/2)(2t-1))^2 * Vol.
            let speeds: Vec<f64> = (0..g.nt())
                .map(|k| (0.5 * entry.eps * (2.0 * g.t(k) - 1.0)).powi(2) * TAU)
                .collect();
            let expect = std_dev(&speeds);
            assert!((res.speed_std() - expect).abs() <= 1e-9 * expect.max(1e-30));
        }
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("eps,energy,length,speed_std,"));
    }
}
