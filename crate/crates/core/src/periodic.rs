//! Periodized power kernels `Σ_m |z + 2Lm|^{-α}` on the lattice and the
//! pairwise difference sums built from them.

use rayon::prelude::*;

use crate::error::{invalid, FormboundError, Result};
use crate::quadrature::integrate;
use crate::spectral::Grid;

/// Largest `N^{2n}` pair count evaluated directly.
pub const PAIR_LIMIT: u128 = 1 << 24;

fn images(dim: usize) -> i64 {
    match dim {
        1 => 1024,
        2 => 32,
        _ => 6,
    }
}

/// `∫_{|t|_∞ > 1} |t|^{-α} dt = 2n/(α-n) ∫_{[-1,1]^{n-1}} (1+|a|²)^{-α/2} da`.
fn outer_integral(dim: usize, alpha: f64) -> Result<f64> {
    let face = match dim {
        1 => 1.0,
        2 => integrate(|a| (1.0 + a * a).powf(-0.5 * alpha), -1.0, 1.0, 1e-15, 1e-13, 200)?.value,
        3 => {
            let inner = |a: f64| {
                integrate(
                    |b| (1.0 + a * a + b * b).powf(-0.5 * alpha),
                    -1.0,
                    1.0,
                    1e-15,
                    1e-13,
                    200,
                )
                .map(|q| q.value)
                .unwrap_or(f64::NAN)
            };
            integrate(inner, -1.0, 1.0, 1e-14, 1e-12, 200)?.value
        }
        _ => return invalid(format!("unsupported dimension {dim}")),
    };
    Ok(2.0 * dim as f64 / (alpha - dim as f64) * face)
}

/// Ensures evaluating all `N^n × N^n` pairs stays under [`PAIR_LIMIT`].
pub(crate) fn pair_guard(grid: &Grid, what: &'static str) -> Result<()> {
    let len = grid.len() as u128;
    if len * len > PAIR_LIMIT {
        return Err(FormboundError::CostGuard {
            what,
            needed: len * len,
            limit: PAIR_LIMIT,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub(crate) struct PeriodicKernel {
    grid: Grid,
    table: Vec<f64>,
}

impl PeriodicKernel {
    /// Kernel with exponent `α > n`; images with `|m|_∞ ≤ M` are summed
    /// directly and the rest replaced by the integral over `|t|_∞ > M + 1/2`.
    pub fn new(grid: &Grid, alpha: f64) -> Result<Self> {
        let n = grid.dim();
        if !(alpha > n as f64) {
            return invalid(format!("kernel exponent must exceed {n}, got {alpha}"));
        }
        let m = images(n);
        let period = 2.0 * grid.half_length();
        let tail = period.powf(-alpha)
            * (m as f64 + 0.5).powf(n as f64 - alpha)
            * outer_integral(n, alpha)?;
        let h = grid.spacing();
        let range = |a: usize| if a < n { -m..=m } else { 0..=0 };
        let table = (0..grid.len())
            .into_par_iter()
            .map(|z| {
                if z == 0 {
                    return 0.0;
                }
                let idx = grid.multi_index(z);
                let mut d = [0.0; 3];
                for a in 0..n {
                    d[a] = (crate::spectral::signed_index(idx[a], grid.points()) as f64 * h).abs();
                }
                let mut acc = 0.0;
                for i in range(0) {
                    let x = d[0] + i as f64 * period;
                    for j in range(1) {
                        let y = d[1] + j as f64 * period;
                        for k in range(2) {
                            let w = d[2] + k as f64 * period;
                            acc += (x * x + y * y + w * w).powf(-0.5 * alpha);
                        }
                    }
                }
                acc + tail
            })
            .collect();
        Ok(Self { grid: *grid, table })
    }

    fn offset(&self, x: usize, y: usize) -> usize {
        let ix = self.grid.multi_index(x);
        let iy = self.grid.multi_index(y);
        let p = self.grid.points();
        let mut d = [0usize; 3];
        for a in 0..self.grid.dim() {
            d[a] = (ix[a] + p - iy[a]) % p;
        }
        self.grid.flat_index(&d)
    }

    /// `K` at the lattice offset with flat index `z`.
    pub fn at(&self, z: usize) -> f64 {
        self.table[z]
    }

    /// `h^n Σ_{y≠x} K(x−y) a(x, y)` for every `x`.
    pub fn pair_sum(&self, f: impl Fn(usize, usize) -> f64 + Sync) -> Vec<f64> {
        let len = self.grid.len();
        let vol = self.grid.cell_volume();
        (0..len)
            .into_par_iter()
            .map(|x| {
                let mut acc = 0.0;
                for y in 0..len {
                    if y != x {
                        acc += self.table[self.offset(x, y)] * f(x, y);
                    }
                }
                acc * vol
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn outer_integral_one_dimension() {
        assert!((outer_integral(1, 3.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn outer_integral_matches_polar_form() {
        // In 2D the same integral is ∫_0^{2π} |θ|_∞^{α-2} dθ / (α-2).
        let alpha = 3.5;
        let polar = integrate(
            |t: f64| t.cos().abs().max(t.sin().abs()).powf(alpha - 2.0),
            0.0,
            2.0 * std::f64::consts::PI,
            1e-14,
            1e-13,
            400,
        )
        .unwrap()
        .value
            / (alpha - 2.0);
        assert!((outer_integral(2, alpha).unwrap() - polar).abs() < 1e-10);
    }

    #[test]
    fn one_dimensional_sum_matches_zeta_series() {
        // Σ_m |1 + 4m|^{-3} summed to very high order.
        let g = make_grid(1, 8, 2.0).unwrap();
        let k = PeriodicKernel::new(&g, 3.0).unwrap();
        let z = g.flat_index(&[2]); // offset 2h = 1
        let mut exact = 0.0;
        for m in -200_000i64..=200_000 {
            exact += (1.0 + 4.0 * m as f64).abs().powi(-3);
        }
        assert!((k.at(z) - exact).abs() < 1e-11 * exact);
    }

    #[test]
    fn kernel_is_symmetric() {
        let g = make_grid(2, 8, 1.0).unwrap();
        let k = PeriodicKernel::new(&g, 2.5).unwrap();
        for x in 0..g.len() {
            for y in 0..g.len() {
                assert_eq!(k.at(k.offset(x, y)), k.at(k.offset(y, x)));
            }
        }
        assert!(PeriodicKernel::new(&g, 2.0).is_err());
    }

    #[test]
    fn guard() {
        assert!(pair_guard(&make_grid(2, 64, 1.0).unwrap(), "pairs").is_ok());
        assert!(pair_guard(&make_grid(2, 128, 1.0).unwrap(), "pairs").is_err());
    }
}
