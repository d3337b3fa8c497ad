//! Lattice balls and sliding ball sums on the torus.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::spectral::Grid;

/// Offsets `o` with `|o|h ≤ r` (closed) or `|o|h < r` (open).
#[derive(Debug, Clone)]
pub(crate) struct BallStencil {
    offsets: Vec<[i64; 3]>,
}

impl BallStencil {
    pub fn closed(grid: &Grid, radius: f64) -> Result<Self> {
        Self::build(grid, radius, true)
    }

    pub fn open(grid: &Grid, radius: f64) -> Result<Self> {
        Self::build(grid, radius, false)
    }

    fn build(grid: &Grid, radius: f64, closed: bool) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        let h = grid.spacing();
        let n = grid.dim();
        // Relative slack so that radii landing exactly on lattice distances
        // are classified the same way on every platform.
        let r2 = (radius / h).powi(2);
        let inside = |d2: i64| {
            let d2 = d2 as f64;
            if closed {
                d2 <= r2 * (1.0 + 1e-12)
            } else {
                d2 < r2 * (1.0 - 1e-12)
            }
        };
        let reach = (radius / h).floor() as i64;
        let points = grid.points() as i64;
        let span = |axis: usize| if axis < n { -reach..=reach } else { 0..=0 };
        // A ball wider than the torus covers some cells twice; keep each once.
        let mut seen = BTreeSet::new();
        let mut offsets = Vec::new();
        for a in span(0) {
            for b in span(1) {
                for c in span(2) {
                    if inside(a * a + b * b + c * c) {
                        let key = [a.rem_euclid(points), b.rem_euclid(points), c.rem_euclid(points)];
                        if seen.insert(key) {
                            offsets.push([a, b, c]);
                        }
                    }
                }
            }
        }
        Ok(Self { offsets })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[[i64; 3]] {
        &self.offsets
    }

    /// `h^n · #cells`.
    pub fn measure(&self, grid: &Grid) -> f64 {
        self.len() as f64 * grid.cell_volume()
    }

    /// `Σ_{o} w(c + o)`, in stencil order.
    pub fn sum_at(&self, grid: &Grid, weights: &[f64], center: usize) -> f64 {
        let idx = grid.multi_index(center);
        let n = grid.points() as i64;
        let dim = grid.dim();
        let mut acc = 0.0;
        for o in &self.offsets {
            let mut flat = 0usize;
            for a in 0..dim {
                flat = flat * grid.points() + (idx[a] as i64 + o[a]).rem_euclid(n) as usize;
            }
            acc += weights[flat];
        }
        acc
    }

    /// Ball sums centred at every grid point; identical to [`Self::sum_at`].
    pub fn sums(&self, grid: &Grid, weights: &[f64]) -> Vec<f64> {
        (0..grid.len())
            .into_par_iter()
            .map(|c| self.sum_at(grid, weights, c))
            .collect()
    }
}

/// Index and value of the largest entry; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| (i, v))
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) || (a.1.is_nan() && !b.1.is_nan()) {
                b
            } else {
                a
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn closed_and_open_counts() {
        let g = make_grid(2, 32, 4.0).unwrap();
        // h = 1/4, radius 1 = 4 cells: lattice points with a²+b² ≤ 16.
        assert_eq!(BallStencil::closed(&g, 1.0).unwrap().len(), 49);
        assert_eq!(BallStencil::open(&g, 1.0).unwrap().len(), 45);
        let g1 = make_grid(1, 16, 2.0).unwrap();
        assert_eq!(BallStencil::open(&g1, 0.25).unwrap().len(), 1);
        assert_eq!(BallStencil::closed(&g1, 0.25).unwrap().len(), 3);
    }

    #[test]
    fn wrapping_balls_count_cells_once() {
        let g = make_grid(1, 8, 1.0).unwrap();
        assert_eq!(BallStencil::closed(&g, 1.0).unwrap().len(), 8);
        assert_eq!(BallStencil::open(&g, 1.0).unwrap().len(), 7);
        assert_eq!(BallStencil::closed(&g, 5.0).unwrap().len(), 8);
    }

    #[test]
    fn sums_match_direct_loop() {
        let g = make_grid(2, 16, 2.0).unwrap();
        let w: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64).collect();
        let st = BallStencil::closed(&g, 0.6).unwrap();
        let sums = st.sums(&g, &w);
        for c in [0, 17, 255] {
            let mut direct = 0.0;
            for j in 0..g.len() {
                if g.torus_distance(c, j) <= 0.6 + 1e-12 {
                    direct += w[j];
                }
            }
            assert!((sums[c] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some((1, 3.0)));
        assert_eq!(argmax(&[]), None);
    }
}
