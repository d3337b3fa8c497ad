//! Periodic grids, complex fields and exact Fourier-side application of the
//! fractional operators used throughout the crate.
//!
//! The continuum `ℝ^n` is replaced by the torus `[-L, L)^n` sampled at `N`
//! points per axis. Frequencies follow the continuum convention
//! `ξ_k = πk/L`, `k ∈ {-N/2, …, N/2-1}`, so that plane waves read off the
//! continuum symbol directly. Every norm carries the quadrature weight `h^n`.

pub(crate) mod fft;
mod io;
mod kernel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use io::{load_field, read_field, save_field, write_field, FieldDtype, FieldHeader};
pub use kernel::bessel_kernel_g;

pub(crate) use fft::fft_nd;

use crate::error::{invalid, FormboundError, Result};

/// Uniform periodic discretisation of `[-L, L)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_length: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid(format!("dimension must be 1, 2 or 3, got {dim}"));
        }
        if points < 8 || !points.is_power_of_two() {
            return invalid(format!("points per axis must be a power of two >= 8, got {points}"));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return invalid(format!("half-length must be positive, got {half_length}"));
        }
        Ok(Self {
            dim,
            points,
            half_length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Cell width `h = 2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points as f64
    }

    /// Quadrature weight `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Torus volume `(2L)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.dim]
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.shape(), self.spacing())
    }

    /// Signed integer wavenumber `k` of FFT index `j` along one axis.
    pub fn wavenumber(&self, j: usize) -> i64 {
        signed_index(j, self.points)
    }

    /// Frequency `ξ = πk/L` of FFT index `j` along one axis.
    pub fn frequency(&self, j: usize) -> f64 {
        std::f64::consts::PI * self.wavenumber(j) as f64 / self.half_length
    }

    /// Coordinate `-L + jh` of index `j` along one axis.
    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.spacing()
    }

    /// Index along one axis of the grid point closest to `x` (torus-wrapped).
    pub fn nearest_index(&self, x: f64) -> usize {
        let n = self.points as i64;
        let j = ((x + self.half_length) / self.spacing()).round() as i64;
        j.rem_euclid(n) as usize
    }

    /// Index of the point `x = 0` along any axis.
    pub fn origin_index(&self) -> usize {
        self.points / 2
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = flat % self.points;
            flat /= self.points;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim]
            .iter()
            .fold(0usize, |acc, &i| acc * self.points + i)
    }

    /// Position of a flat index, padded with zeros beyond `dim`.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut out = [0.0; 3];
        for a in 0..self.dim {
            out[a] = self.coordinate(idx[a]);
        }
        out
    }

    /// Flat index reached by moving `offset` cells from `flat`, wrapping around.
    pub fn shifted(&self, flat: usize, offset: &[i64]) -> usize {
        let idx = self.multi_index(flat);
        let n = self.points as i64;
        let mut acc = 0usize;
        for a in 0..self.dim {
            let j = (idx[a] as i64 + offset[a]).rem_euclid(n) as usize;
            acc = acc * self.points + j;
        }
        acc
    }

    /// Euclidean distance between two flat indices in the torus metric.
    pub fn torus_distance(&self, a: usize, b: usize) -> f64 {
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        let n = self.points as i64;
        let mut d2 = 0.0;
        for ax in 0..self.dim {
            let mut d = (ia[ax] as i64 - ib[ax] as i64).rem_euclid(n);
            if d > n / 2 {
                d = n - d;
            }
            d2 += (d as f64 * self.spacing()).powi(2);
        }
        d2.sqrt()
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(FormboundError::GridMismatch(format!(
                "{self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Builds the periodic grid `[-L, L)^n` with `N` points per axis.
pub fn make_grid(dim: usize, points: usize, half_length: f64) -> Result<Grid> {
    Grid::new(dim, points, half_length)
}

pub(crate) fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Rectangular periodic lattice with a common spacing on every axis.
///
/// `Grid` is the isotropic case; lifted grids use a different transverse
/// point count with the same spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    shape: Vec<usize>,
    spacing: f64,
}

impl Lattice {
    pub fn new(shape: Vec<usize>, spacing: f64) -> Self {
        Self { shape, spacing }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-axis frequency tables `2πk/(N_axis h)` in FFT order.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        self.shape
            .iter()
            .map(|&n| {
                let period = n as f64 * self.spacing;
                (0..n)
                    .map(|j| 2.0 * std::f64::consts::PI * signed_index(j, n) as f64 / period)
                    .collect()
            })
            .collect()
    }

    /// `|ξ|²` at every lattice frequency, in row-major FFT order.
    pub fn xi_squared(&self) -> Vec<f64> {
        let freqs = self.frequencies();
        let mut out = vec![0.0f64; 1];
        for axis in &freqs {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for &base in &out {
                for &f in axis {
                    next.push(base + f * f);
                }
            }
            out = next;
        }
        out
    }
}

/// Which side of the transform a field's values live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Space,
    Frequency,
}

/// Complex samples on a grid, row-major, last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
    domain: Domain,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![Complex64::default(); grid.len()],
            domain: Domain::Space,
        }
    }

    pub fn constant(grid: Grid, c: Complex64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
            domain: Domain::Space,
        }
    }

    pub fn from_complex(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(FormboundError::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            domain: Domain::Space,
        })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::from_complex(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Samples `f` at every grid point; `f` receives the position (padded to 3).
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64; 3]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self {
            grid,
            values,
            domain: Domain::Space,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn squared_moduli(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.re == 0.0 && v.im == 0.0)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            domain: self.domain,
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_with(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            domain: self.domain,
        })
    }

    /// `h^n Σ a·conj(b)`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Quadrature `L2` norm `(h^n Σ|f|²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Unnormalised DFT of the samples, tagged as a frequency-domain field.
    pub fn to_frequency(&self) -> Result<Field> {
        self.require_space()?;
        let mut values = self.values.clone();
        fft_nd(&mut values, &self.grid.shape(), false);
        Ok(Self {
            grid: self.grid,
            values,
            domain: Domain::Frequency,
        })
    }

    /// Inverse of [`Field::to_frequency`].
    pub fn to_space(&self) -> Result<Field> {
        if self.domain != Domain::Frequency {
            return invalid("field is already in the space domain");
        }
        let mut values = self.values.clone();
        fft_nd(&mut values, &self.grid.shape(), true);
        let scale = 1.0 / self.grid.len() as f64;
        values.iter_mut().for_each(|v| *v *= scale);
        Ok(Self {
            grid: self.grid,
            values,
            domain: Domain::Space,
        })
    }

    pub(crate) fn require_space(&self) -> Result<()> {
        if self.domain != Domain::Space {
            return Err(FormboundError::NotSpaceDomain);
        }
        Ok(())
    }
}

/// A radial Fourier multiplier, evaluated from `|ξ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Symbol {
    /// `(1+|ξ|²)^{-s/2}`, the Bessel potential `J_s`.
    Bessel { s: f64 },
    /// `|ξ|^s`.
    Riesz { s: f64 },
    /// `(1+|ξ|²)^{s/2}`.
    Inflate { s: f64 },
    /// `m_l(ξ) = (1+|ξ|²)^{l/2} - |ξ|^l`.
    GapMl { l: f64 },
    /// `√(|ξ|²+m²) - m`.
    Relativistic { mass: f64 },
    /// `(|ξ| + t)^p`, used for the relative form bound resolvent.
    ShiftedRiesz { shift: f64, power: f64 },
}

impl Symbol {
    pub fn eval(&self, xi_sq: f64) -> f64 {
        match *self {
            Symbol::Bessel { s } => (1.0 + xi_sq).powf(-0.5 * s),
            Symbol::Riesz { s } => {
                if xi_sq == 0.0 {
                    if s == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    xi_sq.powf(0.5 * s)
                }
            }
            Symbol::Inflate { s } => (1.0 + xi_sq).powf(0.5 * s),
            Symbol::GapMl { l } => gap_ml(xi_sq.sqrt(), l),
            Symbol::Relativistic { mass } => {
                // √(r²+m²) - m = r²/(√(r²+m²) + m), no cancellation.
                let root = (xi_sq + mass * mass).sqrt();
                if root + mass == 0.0 {
                    0.0
                } else {
                    xi_sq / (root + mass)
                }
            }
            Symbol::ShiftedRiesz { shift, power } => (xi_sq.sqrt() + shift).powf(power),
        }
    }
}

/// `(1+r²)^{l/2} - r^l`, evaluated without cancellation for large `r`.
pub fn gap_ml(r: f64, l: f64) -> f64 {
    if r <= 1.0 {
        (1.0 + r * r).powf(0.5 * l) - r.powf(l)
    } else {
        r.powf(l) * (0.5 * l * (1.0 / (r * r)).ln_1p()).exp_m1()
    }
}

/// A symbol tabulated on a lattice, ready to be applied repeatedly.
#[derive(Debug, Clone)]
pub struct Multiplier {
    lattice: Lattice,
    table: Vec<f64>,
}

impl Multiplier {
    pub fn new(lattice: Lattice, symbol: impl Fn(f64) -> f64) -> Self {
        let table = lattice.xi_squared().into_iter().map(symbol).collect();
        Self { lattice, table }
    }

    pub fn from_symbol(lattice: Lattice, symbol: Symbol) -> Self {
        Self::new(lattice, |x| symbol.eval(x))
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn max_value(&self) -> f64 {
        self.table.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// `values ← IDFT(symbol · DFT(values))`.
    pub fn apply_in_place(&self, values: &mut [Complex64]) {
        let shape = self.lattice.shape();
        fft_nd(values, shape, false);
        let scale = 1.0 / self.table.len() as f64;
        for (v, &s) in values.iter_mut().zip(&self.table) {
            *v *= s * scale;
        }
        fft_nd(values, shape, true);
    }

    pub fn apply(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut out = values.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}

/// Returns `IDFT(symbol(ξ) · DFT(f))`.
pub fn apply_symbol(f: &Field, symbol: Symbol) -> Result<Field> {
    f.require_space()?;
    let mult = Multiplier::from_symbol(f.grid.lattice(), symbol);
    Ok(Field {
        grid: f.grid,
        values: mult.apply(&f.values),
        domain: Domain::Space,
    })
}

/// `‖(-Δ+1)^{m/2} f‖_{L2}` evaluated on the spectrum with weight `h^n`.
pub fn sobolev_norm(f: &Field, m: f64) -> Result<f64> {
    f.require_space()?;
    if !(m >= 0.0 && m.is_finite()) {
        return invalid(format!("Sobolev order must be >= 0, got {m}"));
    }
    let spec = f.to_frequency()?;
    let xi2 = f.grid.lattice().xi_squared();
    let sum: f64 = spec
        .values
        .iter()
        .zip(&xi2)
        .map(|(v, &x)| (1.0 + x).powf(m) * v.norm_sqr())
        .sum();
    Ok((sum * f.grid.cell_volume() / f.grid.len() as f64).sqrt())
}
