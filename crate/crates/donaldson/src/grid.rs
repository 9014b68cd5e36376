//! Uniform finite-difference discretization of `T^n x [0,1]`.
//!
//! The spatial domain is a flat torus with `nx` points per axis and period
//! `period` (so the metric is Euclidean and the Ricci tensor vanishes); the
//! time axis carries `nt` levels including the two Dirichlet boundary levels
//! `t = 0` and `t = 1`. All stencils are second-order centered: spatial
//! differences wrap periodically, time differences are defined at interior
//! levels only. Storage is time-major, row-major in space.

use std::io::{Read, Write};

use thiserror::Error;

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("spatial dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("need at least 4 points per spatial axis, got {0}")]
    TooFewSpatialPoints(usize),
    #[error("need at least 3 time levels, got {0}")]
    TooFewTimeLevels(usize),
    #[error("torus period must be positive, got {0}")]
    BadPeriod(f64),
    #[error("value buffer has length {got}, grid needs {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad field dump: {0}")]
    BadDump(String),
}

/// Discretization of `T^n x [0,1]`: periodic spatial axes, plain time axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    nx: usize,
    nt: usize,
    period: f64,
}

impl GridSpec {
    /// Default torus period; integer-frequency trigonometric data is then
    /// grid-periodic.
    pub const DEFAULT_PERIOD: f64 = std::f64::consts::TAU;

    pub fn new(dim: usize, nx: usize, nt: usize, period: f64) -> Result<Self, GridError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::BadDimension(dim));
        }
        if nx < 4 {
            return Err(GridError::TooFewSpatialPoints(nx));
        }
        if nt < 3 {
            return Err(GridError::TooFewTimeLevels(nt));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(GridError::BadPeriod(period));
        }
        Ok(Self { dim, nx, nt, period })
    }

    /// Grid with the default period `2*pi`.
    pub fn standard(dim: usize, nx: usize, nt: usize) -> Result<Self, GridError> {
        Self::new(dim, nx, nt, Self::DEFAULT_PERIOD)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per spatial axis.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Time levels, boundary levels included.
    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Spatial spacing `period / nx`.
    pub fn hx(&self) -> f64 {
        self.period / self.nx as f64
    }

    /// Time spacing `1 / (nt - 1)`.
    pub fn ht(&self) -> f64 {
        1.0 / (self.nt - 1) as f64
    }

    /// Number of points in one spatial slice, `nx^dim`.
    pub fn spatial_len(&self) -> usize {
        self.nx.pow(self.dim as u32)
    }

    /// Total number of space-time points.
    pub fn len(&self) -> usize {
        self.nt * self.spatial_len()
    }

    /// Number of interior unknowns (all spatial points, interior time levels).
    pub fn interior_len(&self) -> usize {
        (self.nt - 2) * self.spatial_len()
    }

    /// Volume of the spatial torus.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Time coordinate of level `k`.
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.ht()
    }

    /// Stride of spatial axis `d` in the row-major slice layout.
    #[inline]
    fn stride(&self, d: usize) -> usize {
        self.nx.pow((self.dim - 1 - d) as u32)
    }

    /// Flat space-time index of (time level `k`, flat spatial index `s`).
    #[inline]
    pub fn idx(&self, k: usize, s: usize) -> usize {
        k * self.spatial_len() + s
    }

    /// Flat spatial index shifted by `step` (+1/-1) along axis `d`, with
    /// periodic wrap.
    #[inline]
    pub fn shift(&self, s: usize, d: usize, step: isize) -> usize {
        let stride = self.stride(d);
        let c = (s / stride) % self.nx;
        let c2 = (c as isize + step).rem_euclid(self.nx as isize) as usize;
        s + c2 * stride - c * stride
    }

    /// Decode a flat spatial index into per-axis coordinates.
    pub fn spatial_coords(&self, s: usize, out: &mut [usize; MAX_DIM]) {
        let mut rem = s;
        for d in 0..self.dim {
            let stride = self.stride(d);
            out[d] = rem / stride;
            rem %= stride;
        }
    }

    /// Physical coordinates of a flat spatial index.
    pub fn spatial_point(&self, s: usize, out: &mut [f64; MAX_DIM]) {
        let mut coords = [0usize; MAX_DIM];
        self.spatial_coords(s, &mut coords);
        let hx = self.hx();
        for d in 0..self.dim {
            out[d] = coords[d] as f64 * hx;
        }
    }

    /// Composite trapezoid rule over one value per time level.
    pub fn integrate_t(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nt, "one value per time level");
        let inner: f64 = values[1..self.nt - 1].iter().sum();
        self.ht() * (0.5 * (values[0] + values[self.nt - 1]) + inner)
    }
}

fn ensure_finite(values: &[f64]) -> Result<(), GridError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(GridError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Scalar values on the full space-time grid (`nt` x `nx^dim`, time-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

/// Scalar values on one spatial slice of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    /// Validating constructor for externally supplied values.
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch { got: values.len(), want: grid.len() });
        }
        ensure_finite(&values)?;
        Ok(Self { grid, values })
    }

    /// Sample a closed form `f(t, x)` on the grid.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, &[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut x = [0.0f64; MAX_DIM];
        for k in 0..grid.nt() {
            let t = grid.t(k);
            for s in 0..grid.spatial_len() {
                grid.spatial_point(s, &mut x);
                values.push(f(t, &x[..grid.dim()]));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, k: usize, s: usize) -> f64 {
        self.values[self.grid.idx(k, s)]
    }

    /// Copy of time slice `k`.
    pub fn slice(&self, k: usize) -> SpatialField {
        let m = self.grid.spatial_len();
        SpatialField { grid: self.grid, values: self.values[k * m..(k + 1) * m].to_vec() }
    }

    pub fn slice_values(&self, k: usize) -> &[f64] {
        let m = self.grid.spatial_len();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn set_slice(&mut self, k: usize, slice: &SpatialField) {
        assert_eq!(self.grid, slice.grid, "fields live on different grids");
        let m = self.grid.spatial_len();
        self.values[k * m..(k + 1) * m].copy_from_slice(&slice.values);
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Sup distance to another field on the same grid.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Pointwise linear combination `alpha*self + beta*other`.
    pub fn lin_comb(&self, alpha: f64, beta: f64, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Field { grid: self.grid, values }
    }

    /// Slice-wise periodic Laplacian; every time level is mapped
    /// independently.
    pub fn laplacian(&self) -> Field {
        let grid = self.grid;
        let m = grid.spatial_len();
        let mut out = vec![0.0; grid.len()];
        for k in 0..grid.nt() {
            lap_slice(grid, &self.values[k * m..(k + 1) * m], &mut out[k * m..(k + 1) * m]);
        }
        Field { grid, values: out }
    }

    /// Centered second time difference at interior levels; boundary levels
    /// carry Dirichlet data and are set to 0.
    pub fn d_tt(&self) -> Field {
        let grid = self.grid;
        let m = grid.spatial_len();
        let ht2 = grid.ht() * grid.ht();
        let mut out = vec![0.0; grid.len()];
        for k in 1..grid.nt() - 1 {
            for s in 0..m {
                let u = &self.values;
                out[grid.idx(k, s)] =
                    (u[grid.idx(k + 1, s)] - 2.0 * u[grid.idx(k, s)] + u[grid.idx(k - 1, s)]) / ht2;
            }
        }
        Field { grid, values: out }
    }

    /// Mixed derivative `d_t d_{x_d}` for every spatial axis, centered in both
    /// directions; zero at the time boundary levels. The two stencils commute,
    /// so the composition order does not matter.
    pub fn grad_t_grad_x(&self) -> Vec<Field> {
        let grid = self.grid;
        let m = grid.spatial_len();
        let denom = 4.0 * grid.ht() * grid.hx();
        let mut comps = Vec::with_capacity(grid.dim());
        for d in 0..grid.dim() {
            let mut out = vec![0.0; grid.len()];
            for k in 1..grid.nt() - 1 {
                for s in 0..m {
                    let sp = grid.shift(s, d, 1);
                    let sm = grid.shift(s, d, -1);
                    let u = &self.values;
                    out[grid.idx(k, s)] = (u[grid.idx(k + 1, sp)] - u[grid.idx(k + 1, sm)]
                        - u[grid.idx(k - 1, sp)]
                        + u[grid.idx(k - 1, sm)])
                        / denom;
                }
            }
            comps.push(Field { grid, values: out });
        }
        comps
    }

    /// First time derivative at every level: centered at interior levels,
    /// one-sided second-order at the two boundary levels.
    pub fn time_derivative(&self) -> Field {
        let grid = self.grid;
        let m = grid.spatial_len();
        let ht = grid.ht();
        let nt = grid.nt();
        let mut out = vec![0.0; grid.len()];
        let u = &self.values;
        for s in 0..m {
            out[grid.idx(0, s)] = (-3.0 * u[grid.idx(0, s)] + 4.0 * u[grid.idx(1, s)]
                - u[grid.idx(2, s)])
                / (2.0 * ht);
            out[grid.idx(nt - 1, s)] = (3.0 * u[grid.idx(nt - 1, s)]
                - 4.0 * u[grid.idx(nt - 2, s)]
                + u[grid.idx(nt - 3, s)])
                / (2.0 * ht);
        }
        for k in 1..nt - 1 {
            for s in 0..m {
                out[grid.idx(k, s)] = (u[grid.idx(k + 1, s)] - u[grid.idx(k - 1, s)]) / (2.0 * ht);
            }
        }
        Field { grid, values: out }
    }

    /// Centered first difference along every spatial axis, slice-wise.
    pub fn grad_x(&self) -> Vec<Field> {
        let grid = self.grid;
        let m = grid.spatial_len();
        let two_hx = 2.0 * grid.hx();
        (0..grid.dim())
            .map(|d| {
                let mut out = vec![0.0; grid.len()];
                for k in 0..grid.nt() {
                    let base = k * m;
                    for s in 0..m {
                        out[base + s] = (self.values[base + grid.shift(s, d, 1)]
                            - self.values[base + grid.shift(s, d, -1)])
                            / two_hx;
                    }
                }
                Field { grid, values: out }
            })
            .collect()
    }

    /// Torus integral of time slice `k`.
    pub fn integrate_x_slice(&self, k: usize) -> f64 {
        integrate_slice(self.grid, self.slice_values(k))
    }

    /// Time-reversed path: level `k` becomes level `nt-1-k`.
    pub fn reverse_time(&self) -> Field {
        let grid = self.grid;
        let m = grid.spatial_len();
        let mut values = vec![0.0; grid.len()];
        for k in 0..grid.nt() {
            let src = &self.values[k * m..(k + 1) * m];
            values[(grid.nt() - 1 - k) * m..(grid.nt() - k) * m].copy_from_slice(src);
        }
        Field { grid, values }
    }
}

impl SpatialField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.spatial_len()] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.spatial_len() {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                want: grid.spatial_len(),
            });
        }
        ensure_finite(&values)?;
        Ok(Self { grid, values })
    }

    /// Sample a closed form `f(x)` on the spatial grid.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.spatial_len());
        let mut x = [0.0f64; MAX_DIM];
        for s in 0..grid.spatial_len() {
            grid.spatial_point(s, &mut x);
            values.push(f(&x[..grid.dim()]));
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn laplacian(&self) -> SpatialField {
        let mut out = vec![0.0; self.values.len()];
        lap_slice(self.grid, &self.values, &mut out);
        SpatialField { grid: self.grid, values: out }
    }

    /// Centered first difference along every spatial axis.
    pub fn grad_x(&self) -> Vec<SpatialField> {
        let grid = self.grid;
        let two_hx = 2.0 * grid.hx();
        (0..grid.dim())
            .map(|d| {
                let values = (0..grid.spatial_len())
                    .map(|s| {
                        (self.values[grid.shift(s, d, 1)] - self.values[grid.shift(s, d, -1)])
                            / two_hx
                    })
                    .collect();
                SpatialField { grid, values }
            })
            .collect()
    }

    /// Torus integral: uniform-weight sum times `hx^dim` (exact trapezoid on
    /// a periodic grid).
    pub fn integrate_x(&self) -> f64 {
        integrate_slice(self.grid, &self.values)
    }
}

fn lap_slice(grid: GridSpec, input: &[f64], out: &mut [f64]) {
    let hx2 = grid.hx() * grid.hx();
    for (s, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for d in 0..grid.dim() {
            acc += input[grid.shift(s, d, 1)] - 2.0 * input[s] + input[grid.shift(s, d, -1)];
        }
        *o = acc / hx2;
    }
}

fn integrate_slice(grid: GridSpec, values: &[f64]) -> f64 {
    let weight = grid.hx().powi(grid.dim() as i32);
    values.iter().sum::<f64>() * weight
}

/// Binary field dumps.
///
/// Layout: magic `DNFD`, format version (1 byte), spatial dimension (1 byte),
/// `nx` (u32 LE), `nt` (u32 LE), period (f64 LE), then `nt * nx^dim` values as
/// f64 LE, time-major, row-major in space. A dump with `nt = 1` holds a
/// spatial-only field.
pub mod dnfd {
    use super::*;

    pub const MAGIC: [u8; 4] = *b"DNFD";
    pub const VERSION: u8 = 1;

    fn write_header(
        w: &mut impl Write,
        dim: usize,
        nx: usize,
        nt: usize,
        period: f64,
    ) -> Result<(), GridError> {
        w.write_all(&MAGIC)?;
        w.write_all(&[VERSION, dim as u8])?;
        w.write_all(&(nx as u32).to_le_bytes())?;
        w.write_all(&(nt as u32).to_le_bytes())?;
        w.write_all(&period.to_le_bytes())?;
        Ok(())
    }

    fn write_values(w: &mut impl Write, values: &[f64]) -> Result<(), GridError> {
        let mut buf = Vec::with_capacity(values.len() * 8);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub struct RawDump {
        pub dim: usize,
        pub nx: usize,
        pub nt: usize,
        pub period: f64,
        pub values: Vec<f64>,
    }

    pub fn read_raw(r: &mut impl Read) -> Result<RawDump, GridError> {
        let mut head = [0u8; 22];
        r.read_exact(&mut head)?;
        if head[0..4] != MAGIC {
            return Err(GridError::BadDump("bad magic bytes".into()));
        }
        if head[4] != VERSION {
            return Err(GridError::BadDump(format!("unsupported version {}", head[4])));
        }
        let dim = head[5] as usize;
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::BadDump(format!("bad dimension {dim}")));
        }
        let nx = u32::from_le_bytes(head[6..10].try_into().unwrap()) as usize;
        let nt = u32::from_le_bytes(head[10..14].try_into().unwrap()) as usize;
        let period = f64::from_le_bytes(head[14..22].try_into().unwrap());
        let count = nt
            .checked_mul(nx.checked_pow(dim as u32).ok_or_else(|| {
                GridError::BadDump("extent overflow".into())
            })?)
            .ok_or_else(|| GridError::BadDump("extent overflow".into()))?;
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| GridError::BadDump("extent overflow".into()))?;
        let mut buf = vec![0u8; bytes];
        r.read_exact(&mut buf)?;
        let values = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(RawDump { dim, nx, nt, period, values })
    }

    pub fn write_field(w: &mut impl Write, field: &Field) -> Result<(), GridError> {
        let g = field.grid();
        write_header(w, g.dim(), g.nx(), g.nt(), g.period())?;
        write_values(w, field.values())
    }

    /// Spatial fields are stored with `nt = 1`.
    pub fn write_spatial(w: &mut impl Write, field: &SpatialField) -> Result<(), GridError> {
        let g = field.grid();
        write_header(w, g.dim(), g.nx(), 1, g.period())?;
        write_values(w, field.values())
    }

    pub fn read_field(r: &mut impl Read) -> Result<Field, GridError> {
        let raw = read_raw(r)?;
        let grid = GridSpec::new(raw.dim, raw.nx, raw.nt, raw.period)
            .map_err(|e| GridError::BadDump(e.to_string()))?;
        Field::from_values(grid, raw.values)
    }

    /// Read a spatial-only dump (`nt = 1`) onto the slices of `grid`.
    pub fn read_spatial(r: &mut impl Read, grid: GridSpec) -> Result<SpatialField, GridError> {
        let raw = read_raw(r)?;
        if raw.nt != 1 {
            return Err(GridError::BadDump(format!(
                "expected a spatial dump (nt = 1), got nt = {}",
                raw.nt
            )));
        }
        if raw.dim != grid.dim() || raw.nx != grid.nx() || raw.period != grid.period() {
            return Err(GridError::BadDump(
                "spatial dump extent does not match the run grid".into(),
            ));
        }
        SpatialField::from_values(grid, raw.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn grid_1d(nx: usize, nt: usize) -> GridSpec {
        GridSpec::standard(1, nx, nt).unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(0, 8, 9, TAU).is_err());
        assert!(GridSpec::new(4, 8, 9, TAU).is_err());
        assert!(GridSpec::new(1, 3, 9, TAU).is_err());
        assert!(GridSpec::new(1, 8, 2, TAU).is_err());
        assert!(GridSpec::new(1, 8, 9, 0.0).is_err());
        assert!(GridSpec::new(3, 4, 3, 1.0).is_ok());
    }

    #[test]
    fn shift_wraps_periodically() {
        let g = GridSpec::standard(2, 4, 3).unwrap();
        // s = (i, j) = (0, 3): +1 along axis 1 wraps to (0, 0).
        assert_eq!(g.shift(3, 1, 1), 0);
        assert_eq!(g.shift(0, 1, -1), 3);
        assert_eq!(g.shift(0, 0, -1), 12);
        assert_eq!(g.shift(12, 0, 1), 0);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let g = grid_1d(16, 5);
        let u = Field::from_fn(g, |_, _| 3.25);
        assert_eq!(u.laplacian().sup_norm(), 0.0);
    }

    #[test]
    fn laplacian_matches_discrete_symbol_on_cosine() {
        // Discrete Fourier symbol of the 3-point stencil at frequency 1:
        // -(2/hx^2) (1 - cos hx).
        let g = grid_1d(16, 3);
        let hx = g.hx();
        let symbol = -(2.0 / (hx * hx)) * (1.0 - hx.cos());
        assert!((symbol - (-0.987196)).abs() < 1e-4);
        let u = SpatialField::from_fn(g, |x| x[0].cos());
        let lap = u.laplacian();
        for (s, v) in lap.values().iter().enumerate() {
            let x = s as f64 * hx;
            assert!((v - symbol * x.cos()).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn constructors_reject_non_finite_values() {
        let g = grid_1d(4, 3);
        let mut values = vec![0.0; g.len()];
        values[5] = f64::NAN;
        assert!(matches!(Field::from_values(g, values), Err(GridError::NonFinite(5))));
        let mut values = vec![0.0; g.spatial_len()];
        values[1] = f64::INFINITY;
        assert!(SpatialField::from_values(g, values).is_err());
        assert!(Field::from_values(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn laplacian_3d_is_sum_of_axis_results() {
        let g = GridSpec::standard(3, 8, 3).unwrap();
        let hx = g.hx();
        let symbol = -(2.0 / (hx * hx)) * (1.0 - hx.cos());
        let u = SpatialField::from_fn(g, |x| x[0].cos() + x[1].cos() + x[2].cos());
        let expect = SpatialField::from_fn(g, |x| symbol * (x[0].cos() + x[1].cos() + x[2].cos()));
        for (a, b) in u.laplacian().values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_2d_is_sum_of_axis_results() {
        let g = GridSpec::standard(2, 16, 3).unwrap();
        let hx = g.hx();
        let symbol = -(2.0 / (hx * hx)) * (1.0 - hx.cos());
        let u = SpatialField::from_fn(g, |x| x[0].cos() + x[1].cos());
        let lap = u.laplacian();
        let expect = SpatialField::from_fn(g, |x| symbol * (x[0].cos() + x[1].cos()));
        for (a, b) in lap.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn d_tt_exact_on_quadratic() {
        let g = grid_1d(4, 9);
        let u = Field::from_fn(g, |t, _| t * t - t);
        let out = u.d_tt();
        for k in 1..g.nt() - 1 {
            for s in 0..g.spatial_len() {
                assert!((out.at(k, s) - 2.0).abs() < 1e-12);
            }
        }
        for s in 0..g.spatial_len() {
            assert_eq!(out.at(0, s), 0.0);
            assert_eq!(out.at(g.nt() - 1, s), 0.0);
        }
        let c = Field::from_fn(g, |_, _| 7.0);
        assert_eq!(c.d_tt().sup_norm(), 0.0);
    }

    #[test]
    fn d_tt_of_cubic_at_midpoint() {
        // h_t = 0.25, u = t^3: the centered stencil at t = 0.5 gives exactly 3.
        let g = grid_1d(4, 5);
        let u = Field::from_fn(g, |t, _| t * t * t);
        let out = u.d_tt();
        assert!((out.at(2, 0) - 3.0).abs() < 1e-13);
    }

    #[test]
    fn mixed_derivative_tx() {
        let g = grid_1d(16, 5);
        let hx = g.hx();
        // u = t * cos(x): d_t d_x u = discrete symbol -(sin hx / hx) sin(x).
        let symbol = -(hx.sin() / hx);
        assert!((symbol - (-0.974495)).abs() < 1e-4);
        let u = Field::from_fn(g, |t, x| t * x[0].cos());
        let comps = u.grad_t_grad_x();
        assert_eq!(comps.len(), 1);
        for k in 1..g.nt() - 1 {
            for s in 0..g.spatial_len() {
                let x = s as f64 * hx;
                assert!((comps[0].at(k, s) - symbol * x.sin()).abs() < 1e-12);
            }
        }
        let c = Field::from_fn(g, |_, _| 1.5);
        for comp in c.grad_t_grad_x() {
            assert_eq!(comp.sup_norm(), 0.0);
        }
    }

    #[test]
    fn mixed_derivative_of_separable_is_t_independent() {
        let g = grid_1d(12, 7);
        let u = Field::from_fn(g, |t, x| t * (x[0].sin() + 0.3 * (2.0 * x[0]).cos()));
        let comps = u.grad_t_grad_x();
        let first = comps[0].slice(1);
        for k in 2..g.nt() - 1 {
            for s in 0..g.spatial_len() {
                assert!((comps[0].at(k, s) - first.values()[s]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn torus_integrals() {
        let g = grid_1d(16, 3);
        let one = SpatialField::from_fn(g, |_| 1.0);
        assert!((one.integrate_x() - TAU).abs() < 1e-13);
        let cos = SpatialField::from_fn(g, |x| x[0].cos());
        assert!(cos.integrate_x().abs() < 1e-13);
        // Discrete orthogonality makes cos^2 integrate to pi exactly.
        let cos2 = SpatialField::from_fn(g, |x| x[0].cos().powi(2));
        assert!((cos2.integrate_x() - PI).abs() < 1e-12);
    }

    #[test]
    fn time_quadrature() {
        let g = grid_1d(4, 101);
        let ones = vec![1.0; g.nt()];
        assert!((g.integrate_t(&ones) - 1.0).abs() < 1e-13);
        let sq: Vec<f64> = (0..g.nt()).map(|k| (2.0 * g.t(k) - 1.0).powi(2)).collect();
        assert!((g.integrate_t(&sq) - 1.0 / 3.0).abs() < 1e-4);
        let lin: Vec<f64> = (0..g.nt()).map(|k| g.t(k)).collect();
        assert!((g.integrate_t(&lin) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn laplacian_commutes_with_spatial_differences() {
        // Flat-torus commutation: both operators are convolution stencils.
        let g = GridSpec::standard(2, 8, 4).unwrap();
        let u = Field::from_fn(g, |t, x| {
            (x[0] + 0.5 * t).sin() * (2.0 * x[1]).cos() + t * t * x[0].cos()
        });
        let lap = u.laplacian();
        for d in 0..g.dim() {
            let dlap = spatial_first_diff(&lap, d);
            let lapd = spatial_first_diff(&u, d).laplacian();
            let scale = dlap.sup_norm().max(1.0);
            assert!(dlap.sup_distance(&lapd) <= 1e-13 * scale);
        }
    }

    fn spatial_first_diff(u: &Field, d: usize) -> Field {
        let g = u.grid();
        let mut out = Field::zeros(g);
        let two_hx = 2.0 * g.hx();
        for k in 0..g.nt() {
            for s in 0..g.spatial_len() {
                out.values_mut()[g.idx(k, s)] =
                    (u.at(k, g.shift(s, d, 1)) - u.at(k, g.shift(s, d, -1))) / two_hx;
            }
        }
        out
    }

    #[test]
    fn stencils_are_linear() {
        let g = grid_1d(8, 5);
        let u = Field::from_fn(g, |t, x| (x[0] + t).sin());
        let v = Field::from_fn(g, |t, x| (2.0 * x[0]).cos() * t * t);
        let (alpha, beta) = (1.7, -0.4);
        let combo = u.lin_comb(alpha, beta, &v);
        let lhs = combo.laplacian();
        let rhs = u.laplacian().lin_comb(alpha, beta, &v.laplacian());
        let scale = lhs.sup_norm().max(1.0);
        assert!(lhs.sup_distance(&rhs) <= 1e-13 * scale);
        let lhs_tt = combo.d_tt();
        let rhs_tt = u.d_tt().lin_comb(alpha, beta, &v.d_tt());
        let scale_tt = lhs_tt.sup_norm().max(1.0);
        assert!(lhs_tt.sup_distance(&rhs_tt) <= 1e-13 * scale_tt);
    }

    #[test]
    fn laplacian_integrates_to_zero() {
        let g = GridSpec::standard(2, 8, 3).unwrap();
        let u = SpatialField::from_fn(g, |x| (x[0].sin() + 1.0) * (x[1] * 2.0).cos() + 0.3);
        let total = u.laplacian().integrate_x();
        assert!(total.abs() <= 1e-12 * u.sup_norm().max(1.0) * g.volume());
    }

    #[test]
    fn second_order_consistency() {
        // Error against the continuum Laplacian shrinks by ~4x per refinement.
        let exact = |x: f64| -(x.cos()) - 4.0 * 0.3 * (2.0 * x).sin();
        let sample = |nx: usize| -> f64 {
            let g = grid_1d(nx, 3);
            let u = SpatialField::from_fn(g, |x| x[0].cos() + 0.3 * (2.0 * x[0]).sin());
            let lap = u.laplacian();
            lap.values()
                .iter()
                .enumerate()
                .fold(0.0f64, |m, (s, v)| m.max((v - exact(s as f64 * g.hx())).abs()))
        };
        let (e1, e2) = (sample(16), sample(32));
        let factor = e1 / e2;
        assert!(factor > 3.2 && factor < 4.8, "factor {factor}");
    }

    #[test]
    fn dnfd_round_trip_is_bit_exact() {
        let g = GridSpec::standard(2, 5, 4).unwrap();
        let u = Field::from_fn(g, |t, x| (x[0] * 3.1).sin() * (x[1] - 0.2).cos() + t / 3.0);
        let mut buf = Vec::new();
        dnfd::write_field(&mut buf, &u).unwrap();
        let back = dnfd::read_field(&mut buf.as_slice()).unwrap();
        assert_eq!(back.grid(), g);
        for (a, b) in back.values().iter().zip(u.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // A second serialization is byte-identical.
        let mut buf2 = Vec::new();
        dnfd::write_field(&mut buf2, &back).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn dnfd_rejects_corrupt_dumps() {
        let g = grid_1d(4, 3);
        let u = Field::zeros(g);
        let mut buf = Vec::new();
        dnfd::write_field(&mut buf, &u).unwrap();
        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(dnfd::read_field(&mut bad_magic.as_slice()).is_err());
        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(dnfd::read_field(&mut bad_version.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 4];
        assert!(dnfd::read_field(&mut &truncated[..]).is_err());
    }

    #[test]
    fn spatial_dump_round_trip() {
        let g = grid_1d(8, 5);
        let phi = SpatialField::from_fn(g, |x| 0.3 * x[0].cos());
        let mut buf = Vec::new();
        dnfd::write_spatial(&mut buf, &phi).unwrap();
        let back = dnfd::read_spatial(&mut buf.as_slice(), g).unwrap();
        for (a, b) in back.values().iter().zip(phi.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // Full-grid dumps are rejected where a spatial dump is expected.
        let mut fbuf = Vec::new();
        dnfd::write_field(&mut fbuf, &Field::zeros(g)).unwrap();
        assert!(dnfd::read_spatial(&mut fbuf.as_slice(), g).is_err());
    }
}
