//! Run configuration: TOML with explicit `grid`, `problem`, `solver` and
//! `output` blocks. Boundary data and right-hand sides are finite cosine
//! series (grid-periodic by construction: integer frequencies), constants,
//! or DNFD dumps.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use donaldson::grid::dnfd;
use donaldson::{Field, GridSpec, SolverConfig, SpatialField};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub problem: ProblemBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub dim: usize,
    pub nx: usize,
    pub nt: usize,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    GridSpec::DEFAULT_PERIOD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub phi0: SourceSpec,
    pub phi1: SourceSpec,
    /// Right-hand side; required by `solve`, ignored by `geodesic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<SourceSpec>,
}

/// A field source: constant, cosine series, or DNFD dump path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SourceSpec {
    Constant { constant: f64 },
    Series { series: Vec<SeriesTerm> },
    Dnfd { dnfd: PathBuf },
}

/// One term `amp * cos(2 pi <freq, x> / period + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesTerm {
    pub freq: Vec<i64>,
    pub amp: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub ds_init: f64,
    pub ds_min: f64,
    pub damping_factor: f64,
    pub max_backtracks: usize,
    pub direct_max_unknowns: usize,
    pub krylov_tol_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_amplitude: Option<f64>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            newton_tol: cfg.newton_tol,
            max_newton_iters: cfg.max_newton_iters,
            ds_init: cfg.ds_init,
            ds_min: cfg.ds_min,
            damping_factor: cfg.damping_factor,
            max_backtracks: cfg.max_backtracks,
            direct_max_unknowns: cfg.direct_max_unknowns,
            krylov_tol_factor: cfg.krylov_tol_factor,
            barrier_amplitude: None,
        }
    }
}

impl SolverBlock {
    pub fn to_solver_config(&self) -> SolverConfig {
        SolverConfig {
            newton_tol: self.newton_tol,
            max_newton_iters: self.max_newton_iters,
            ds_init: self.ds_init,
            ds_min: self.ds_min,
            damping_factor: self.damping_factor,
            max_backtracks: self.max_backtracks,
            direct_max_unknowns: self.direct_max_unknowns,
            krylov_tol_factor: self.krylov_tol_factor,
            barrier_amplitude: self.barrier_amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub write_dumps: bool,
    pub write_csv: bool,
    /// Seed for the randomized property suites.
    pub seed: u64,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), write_dumps: true, write_csv: true, seed: 0 }
    }
}

/// A parsed, validated run: grid, boundary data in H, and (when present) a
/// positive right-hand side.
#[derive(Debug)]
pub struct LoadedRun {
    pub config: RunConfig,
    pub grid: GridSpec,
    pub phi0: SpatialField,
    pub phi1: SpatialField,
    pub rhs: Option<Field>,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validate and materialize the run: grid construction, H-membership of
    /// the boundary data, positivity of the right-hand side.
    pub fn realize(&self, base_dir: &Path) -> Result<LoadedRun, ConfigError> {
        let grid = GridSpec::new(self.grid.dim, self.grid.nx, self.grid.nt, self.grid.period)
            .map_err(|e| ConfigError(format!("grid block: {e}")))?;
        let phi0 = spatial_from_source(&self.problem.phi0, grid, base_dir, "phi0")?;
        let phi1 = spatial_from_source(&self.problem.phi1, grid, base_dir, "phi1")?;
        for (name, field) in [("phi0", &phi0), ("phi1", &phi1)] {
            if let Err(e) = donaldson::operator::check_membership_in_h(field) {
                return err(format!("problem.{name}: {e}"));
            }
        }
        let rhs = match &self.problem.rhs {
            Some(src) => {
                let f = field_from_source(src, grid, base_dir, "rhs")?;
                let min = f.values().iter().fold(f64::INFINITY, |m, v| m.min(*v));
                if !(min > 0.0) {
                    return err(format!(
                        "problem.rhs: right-hand side must be positive everywhere, min = {min}"
                    ));
                }
                Some(f)
            }
            None => None,
        };
        let solver = self.solver.to_solver_config();
        solver.validate().map_err(|e| ConfigError(format!("solver block: {e}")))?;
        Ok(LoadedRun { config: self.clone(), grid, phi0, phi1, rhs, solver })
    }
}

fn series_value(terms: &[SeriesTerm], grid: GridSpec, x: &[f64]) -> f64 {
    let wave = std::f64::consts::TAU / grid.period();
    terms
        .iter()
        .map(|term| {
            let mut angle = term.phase;
            for (d, &k) in term.freq.iter().enumerate() {
                angle += wave * k as f64 * x[d];
            }
            term.amp * angle.cos()
        })
        .sum()
}

fn check_series(terms: &[SeriesTerm], grid: GridSpec, what: &str) -> Result<(), ConfigError> {
    for term in terms {
        if term.freq.len() != grid.dim() {
            return err(format!(
                "problem.{what}: series frequency vector has {} entries, grid dimension is {}",
                term.freq.len(),
                grid.dim()
            ));
        }
        if !term.amp.is_finite() || !term.phase.is_finite() {
            return err(format!("problem.{what}: non-finite series coefficient"));
        }
    }
    Ok(())
}

fn resolve(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

fn spatial_from_source(
    src: &SourceSpec,
    grid: GridSpec,
    base_dir: &Path,
    what: &str,
) -> Result<SpatialField, ConfigError> {
    match src {
        SourceSpec::Constant { constant } => {
            if !constant.is_finite() {
                return err(format!("problem.{what}: non-finite constant"));
            }
            Ok(SpatialField::from_fn(grid, |_| *constant))
        }
        SourceSpec::Series { series } => {
            check_series(series, grid, what)?;
            Ok(SpatialField::from_fn(grid, |x| series_value(series, grid, x)))
        }
        SourceSpec::Dnfd { dnfd: path } => {
            let full = resolve(base_dir, path);
            let mut file = fs::File::open(&full)
                .map_err(|e| ConfigError(format!("problem.{what}: cannot open {}: {e}", full.display())))?;
            dnfd::read_spatial(&mut file, grid)
                .map_err(|e| ConfigError(format!("problem.{what}: {e}")))
        }
    }
}

fn field_from_source(
    src: &SourceSpec,
    grid: GridSpec,
    base_dir: &Path,
    what: &str,
) -> Result<Field, ConfigError> {
    match src {
        SourceSpec::Constant { constant } => {
            if !constant.is_finite() {
                return err(format!("problem.{what}: non-finite constant"));
            }
            Ok(Field::from_fn(grid, |_, _| *constant))
        }
        SourceSpec::Series { series } => {
            check_series(series, grid, what)?;
            Ok(Field::from_fn(grid, |_, x| series_value(series, grid, x)))
        }
        SourceSpec::Dnfd { dnfd: path } => {
            let full = resolve(base_dir, path);
            let mut file = fs::File::open(&full)
                .map_err(|e| ConfigError(format!("problem.{what}: cannot open {}: {e}", full.display())))?;
            let field = dnfd::read_field(&mut file)
                .map_err(|e| ConfigError(format!("problem.{what}: {e}")))?;
            if field.grid() != grid {
                return err(format!(
                    "problem.{what}: dump grid does not match the run grid"
                ));
            }
            Ok(field)
        }
    }
}
