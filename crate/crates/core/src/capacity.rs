//! The capacity `cap(e, W^{1/2}_2) = inf { ‖(-Δ+1)^{1/4}u‖² : u ≥ 1 on e }`
//! and the criteria built on it.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{levelset_weight, CriterionResult, Witness};
use crate::error::{invalid, FormboundError, Result};
use crate::periodic::{pair_guard, PeriodicKernel};
use crate::spectral::{Field, Grid, Multiplier, Symbol};
use crate::stencil::BallStencil;

/// A subset of the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMask {
    grid: Grid,
    mask: Vec<bool>,
}

impl SetMask {
    pub fn new(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(FormboundError::GridMismatch(format!(
                "mask has {} entries, grid has {}",
                mask.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, mask })
    }

    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            mask: vec![false; grid.len()],
        }
    }

    pub fn full(grid: Grid) -> Self {
        Self {
            grid,
            mask: vec![true; grid.len()],
        }
    }

    pub fn from_indices(grid: Grid, indices: &[usize]) -> Result<Self> {
        let mut mask = vec![false; grid.len()];
        for &i in indices {
            if i >= grid.len() {
                return invalid(format!("index {i} outside a grid of {} points", grid.len()));
            }
            mask[i] = true;
        }
        Ok(Self { grid, mask })
    }

    /// Grid points within torus distance `radius` (closed) of `center`.
    pub fn ball(grid: Grid, center: &[f64], radius: f64) -> Result<Self> {
        if center.len() != grid.dim() {
            return invalid(format!(
                "centre {center:?} has {} coordinates, grid has {}",
                center.len(),
                grid.dim()
            ));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return invalid(format!("radius must be non-negative, got {radius}"));
        }
        let period = 2.0 * grid.half_length();
        let mask = (0..grid.len())
            .map(|j| {
                let x = grid.position(j);
                let d2: f64 = (0..grid.dim())
                    .map(|a| {
                        let d = (x[a] - center[a]).rem_euclid(period);
                        d.min(period - d).powi(2)
                    })
                    .sum();
                d2 <= radius * radius * (1.0 + 1e-12)
            })
            .collect();
        Ok(Self { grid, mask })
    }

    /// Points with `values ≥ threshold`.
    pub fn superlevel(grid: Grid, values: &[f64], threshold: f64) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| v >= threshold).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.mask[flat]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// `|e| = h^n · #points`.
    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    /// Largest torus distance between two points of the set.
    pub fn diameter(&self) -> f64 {
        let idx = self.indices();
        idx.par_iter()
            .enumerate()
            .map(|(i, &a)| {
                idx[i + 1..]
                    .iter()
                    .map(|&b| self.grid.torus_distance(a, b))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn is_subset_of(&self, other: &SetMask) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &SetMask) -> Result<SetMask> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| a || b).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub value: f64,
    #[serde(skip)]
    pub minimizer: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `L‖P(u − ∇f/L) − u‖_∞ / ‖∇f‖_∞` at the returned iterate.
    pub stationarity_residual: f64,
    pub measure: f64,
}

impl CapacityResult {
    pub fn minimizer_field(&self, grid: Grid) -> Result<Field> {
        Field::from_real(grid, &self.minimizer)
    }
}

/// Consecutive small objective changes required to stop.
const STALL_WINDOW: usize = 10;

struct Objective {
    symbol: Multiplier,
    cell: f64,
}

impl Objective {
    fn new(grid: &Grid) -> Self {
        Self {
            symbol: Multiplier::from_symbol(grid.lattice(), Symbol::Inflate { s: 1.0 }),
            cell: grid.cell_volume(),
        }
    }

    /// `(h^n ⟨u, S u⟩, 2 h^n S u)`.
    fn eval(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let mut z: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.symbol.apply_in_place(&mut z);
        let su: Vec<f64> = z.iter().map(|c| c.re).collect();
        let value = self.cell * u.iter().zip(&su).map(|(a, b)| a * b).sum::<f64>();
        let grad = su.into_iter().map(|v| 2.0 * self.cell * v).collect();
        (value, grad)
    }

    fn lipschitz(&self) -> f64 {
        2.0 * self.cell * self.symbol.max_value()
    }
}

fn project(u: &mut [f64], mask: &[bool]) {
    for (v, &m) in u.iter_mut().zip(mask) {
        if m && *v < 1.0 {
            *v = 1.0;
        }
    }
}

/// Projected gradient descent with Nesterov momentum, restarted whenever
/// the objective increases, from `u = 1_e`.
pub fn capacity(e: &SetMask, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    if !(tol > 0.0) {
        return invalid(format!("tol must be positive, got {tol}"));
    }
    let g = e.grid;
    let measure = e.measure();
    if e.is_empty() {
        return Ok(CapacityResult {
            value: 0.0,
            minimizer: vec![0.0; g.len()],
            iterations: 0,
            converged: true,
            stationarity_residual: 0.0,
            measure,
        });
    }
    let obj = Objective::new(&g);
    let step = 1.0 / obj.lipschitz();
    let mut x: Vec<f64> = e.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let (mut fx, mut gx) = obj.eval(&x);
    let mut y = x.clone();
    let mut gy = gx.clone();
    let mut t = 1.0f64;
    let mut stall = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next: Vec<f64> = y.iter().zip(&gy).map(|(a, b)| a - step * b).collect();
        project(&mut next, &e.mask);
        let (fn_, gn) = obj.eval(&next);
        if fn_ > fx * (1.0 + 8.0 * f64::EPSILON) {
            // Momentum overshot: restart from the last iterate with a plain step.
            t = 1.0;
            y.clone_from(&x);
            gy.clone_from(&gx);
            continue;
        }
        let change = (fx - fn_).abs() / fn_.abs().max(f64::MIN_POSITIVE);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        let (_, gy_new) = obj.eval(&y);
        gy = gy_new;
        t = t_next;
        x = next;
        fx = fn_;
        gx = gn;
        if change < tol {
            stall += 1;
            if stall >= STALL_WINDOW {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    let mut probe: Vec<f64> = x.iter().zip(&gx).map(|(a, b)| a - step * b).collect();
    project(&mut probe, &e.mask);
    let moved = probe
        .iter()
        .zip(&x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let gnorm = gx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let stationarity_residual = if gnorm > 0.0 {
        moved / step / gnorm
    } else {
        0.0
    };
    Ok(CapacityResult {
        value: fx,
        minimizer: x,
        iterations,
        converged,
        stationarity_residual,
        measure,
    })
}

/// `h^n Σ |u|² + ½ h^{2n} Σ_{x≠y} K(x−y) |u(x) − u(y)|²` with the periodized
/// kernel `K(z) = Σ_m |z + 2Lm|^{-(n+1)}`.
pub fn gagliardo_surrogate(grid: &Grid, u: &[f64]) -> Result<f64> {
    pair_guard(grid, "Gagliardo surrogate")?;
    let kernel = PeriodicKernel::new(grid, grid.dim() as f64 + 1.0)?;
    let cell = grid.cell_volume();
    let per_point = kernel.pair_sum(|x, y| (u[x] - u[y]).powi(2));
    let semi = 0.5 * cell * per_point.iter().sum::<f64>();
    let l2 = cell * u.iter().map(|v| v * v).sum::<f64>();
    Ok(l2 + semi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricCheck {
    pub margin: f64,
    pub fitted_c: f64,
    pub capacity: CapacityResult,
}

/// `cap(e)/|e|^{(n-1)/n}` for `n ≥ 2`, `cap(e)·ln(2/|e|)` for `n = 1`;
/// requires `diam(e) ≤ 1`.
pub fn isoperimetric_check(e: &SetMask, tol: f64, max_iter: usize) -> Result<IsoperimetricCheck> {
    if e.is_empty() {
        return invalid("the isoperimetric ratio needs a nonempty set");
    }
    let diameter = e.diameter();
    if diameter > 1.0 + 1e-12 {
        return Err(FormboundError::Diameter {
            diameter,
            limit: 1.0,
        });
    }
    let cap = capacity(e, tol, max_iter)?;
    let ratio = cap.value * levelset_weight(e.grid.dim(), cap.measure);
    Ok(IsoperimetricCheck {
        margin: ratio,
        fitted_c: ratio,
        capacity: cap,
    })
}

/// `sup_e ∫_e |Φ|² / cap(e)` over `family`.
pub fn capacity_test(
    phi: &Field,
    family: &[SetMask],
    tol: f64,
    max_iter: usize,
) -> Result<CriterionResult> {
    phi.require_space()?;
    if family.is_empty() {
        return invalid("capacity test needs at least one set");
    }
    for e in family {
        phi.grid().ensure_same(&e.grid)?;
        let d = e.diameter();
        if d > 1.0 + 1e-12 {
            return Err(FormboundError::Diameter {
                diameter: d,
                limit: 1.0,
            });
        }
    }
    let w = phi.squared_moduli();
    let cell = phi.grid().cell_volume();
    let results: Vec<Result<(f64, f64, bool)>> = family
        .par_iter()
        .map(|e| {
            let cap = capacity(e, tol, max_iter)?;
            let mass: f64 = e.indices().iter().map(|&i| w[i]).sum::<f64>() * cell;
            let q = if cap.value > 0.0 { mass / cap.value } else { 0.0 };
            Ok((q, cap.measure, cap.converged))
        })
        .collect();
    let mut best = (0.0f64, 0usize, 0.0f64);
    let mut all_converged = true;
    for (i, r) in results.into_iter().enumerate() {
        let (q, m, conv) = r?;
        all_converged &= conv;
        if q > best.0 || i == 0 {
            best = (q, i, m);
        }
    }
    Ok(CriterionResult {
        name: "capacity".into(),
        constant: best.0,
        witness: Witness::Set {
            index: best.1,
            measure: best.2,
        },
        parameters: BTreeMap::from([
            ("sets".into(), family.len() as f64),
            ("tol".into(), tol),
            ("converged".into(), if all_converged { 1.0 } else { 0.0 }),
        ]),
    })
}

/// Balls of the given radii centred at the origin.
pub fn ball_family(grid: Grid, radii: &[f64]) -> Result<Vec<SetMask>> {
    let centre = vec![0.0; grid.dim()];
    radii.iter().map(|&r| SetMask::ball(grid, &centre, r)).collect()
}

/// Superlevel sets `{|Φ|² ≥ θ max}` inside the radius-1/2 window around the
/// maximum of `|Φ|`, for `count` thresholds `θ` spread geometrically from
/// `0.9` down to `0.01`.
pub fn superlevel_family(phi: &Field, count: usize) -> Result<Vec<SetMask>> {
    phi.require_space()?;
    if count == 0 {
        return invalid("need at least one threshold");
    }
    let g = *phi.grid();
    let w = phi.squared_moduli();
    let (peak_at, peak) = crate::stencil::argmax(&w).expect("non-empty grid");
    let window = BallStencil::closed(&g, 0.5)?;
    let cells: Vec<usize> = window
        .offsets()
        .iter()
        .map(|o| g.shifted(peak_at, &o[..g.dim()]))
        .collect();
    let thresholds: Vec<f64> = if count == 1 {
        vec![0.5]
    } else {
        let (hi, lo) = (0.9f64.ln(), 0.01f64.ln());
        (0..count)
            .map(|i| (hi + (lo - hi) * i as f64 / (count - 1) as f64).exp())
            .collect()
    };
    Ok(thresholds
        .into_iter()
        .map(|theta| {
            let mut mask = vec![false; g.len()];
            if peak > 0.0 {
                for &c in &cells {
                    mask[c] = w[c] >= theta * peak;
                }
            }
            SetMask { grid: g, mask }
        })
        .collect())
}
