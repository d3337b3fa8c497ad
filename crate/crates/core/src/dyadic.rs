//! Dyadic cube masses of `|Φ|²` and the Carleson-type ratio
//! `sup_{P₀} Σ_{P ⊆ P₀} m(P)² |P|^{-1+1/n} / m(P₀)`.

use serde::{Deserialize, Serialize};

use crate::error::{FormboundError, Result};
use crate::spectral::{Field, Grid};

/// A dyadic cube: level `ℓ` (sidelength `2^{-ℓ}`) and its position among
/// the `(2L·2^ℓ)^n` cubes of that level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeRef {
    pub level: usize,
    pub index: Vec<usize>,
}

impl CubeRef {
    pub fn sidelength(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    /// Whether `self` is contained in `other`.
    pub fn is_within(&self, other: &CubeRef) -> bool {
        self.level >= other.level
            && self
                .index
                .iter()
                .zip(&other.index)
                .all(|(&a, &b)| a >> (self.level - other.level) == b)
    }
}

/// Masses `m(P) = ∫_P |Φ|²` for every cube from sidelength 1 down to
/// sidelength `2^{-max_level}`.
#[derive(Debug, Clone)]
pub struct DyadicStats {
    grid: Grid,
    roots: usize,
    masses: Vec<Vec<f64>>,
}

impl DyadicStats {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn max_level(&self) -> usize {
        self.masses.len() - 1
    }

    /// Cubes per axis at `level`.
    pub fn per_axis(&self, level: usize) -> usize {
        self.roots << level
    }

    /// Masses at `level`, row-major in the cube index.
    pub fn masses(&self, level: usize) -> &[f64] {
        &self.masses[level]
    }

    pub fn mass(&self, cube: &CubeRef) -> f64 {
        self.masses[cube.level][self.flat(cube.level, &cube.index)]
    }

    pub fn cube(&self, level: usize, mut flat: usize) -> CubeRef {
        let per = self.per_axis(level);
        let mut index = vec![0; self.grid.dim()];
        for a in (0..index.len()).rev() {
            index[a] = flat % per;
            flat /= per;
        }
        CubeRef { level, index }
    }

    fn flat(&self, level: usize, index: &[usize]) -> usize {
        let per = self.per_axis(level);
        index.iter().fold(0, |acc, &i| acc * per + i)
    }

    /// Flat indices of the `2^n` children of a cube, in lexicographic order.
    pub fn children(&self, level: usize, flat: usize) -> Vec<usize> {
        let parent = self.cube(level, flat);
        let n = parent.index.len();
        (0..1usize << n)
            .map(|bits| {
                let child: Vec<usize> = (0..n)
                    .map(|a| 2 * parent.index[a] + ((bits >> (n - 1 - a)) & 1))
                    .collect();
                self.flat(level + 1, &child)
            })
            .collect()
    }
}

/// Builds the mass tree of `|Φ|²`.
///
/// Requires `2L` to be an integer and every level down to `max_level` to
/// consist of whole grid cells.
pub fn build_dyadic_stats(phi: &Field, max_level: usize) -> Result<DyadicStats> {
    phi.require_space()?;
    let g = *phi.grid();
    let side = 2.0 * g.half_length();
    let roots = side.round();
    if (side - roots).abs() > 1e-9 * side || roots < 1.0 {
        return Err(FormboundError::Alignment(format!(
            "torus side {side} is not a whole number of unit cubes"
        )));
    }
    let roots = roots as usize;
    let finest = roots << max_level;
    if !g.points().is_multiple_of(finest) {
        return Err(FormboundError::Alignment(format!(
            "{} points per axis cannot be split into {finest} dyadic cubes",
            g.points()
        )));
    }
    let cells = g.points() / finest;
    let n = g.dim();
    let sq = phi.squared_moduli();
    let vol = g.cell_volume();

    let mut bottom = vec![0.0; finest.pow(n as u32)];
    // Cells are visited in row-major order, so every cube accumulates its
    // own cells in a fixed order.
    for (flat, &w) in sq.iter().enumerate() {
        let idx = g.multi_index(flat);
        let cube = (0..n).fold(0, |acc, a| acc * finest + idx[a] / cells);
        bottom[cube] += w * vol;
    }

    let mut stats = DyadicStats {
        grid: g,
        roots,
        masses: vec![Vec::new(); max_level + 1],
    };
    stats.masses[max_level] = bottom;
    for level in (0..max_level).rev() {
        let count = (roots << level).pow(n as u32);
        let parent: Vec<f64> = (0..count)
            .map(|p| {
                stats
                    .children(level, p)
                    .into_iter()
                    .map(|c| stats.masses[level + 1][c])
                    .sum()
            })
            .collect();
        stats.masses[level] = parent;
    }
    Ok(stats)
}

/// Deepest level whose cubes are unions of whole grid cells.
pub fn finest_level(grid: &Grid) -> Result<usize> {
    let side = 2.0 * grid.half_length();
    let roots = side.round();
    if (side - roots).abs() > 1e-9 * side || roots < 1.0 || !grid.points().is_multiple_of(roots as usize) {
        return Err(FormboundError::Alignment(format!(
            "torus side {side} does not split {} points into unit cubes",
            grid.points()
        )));
    }
    Ok((grid.points() / roots as usize).trailing_zeros() as usize)
}

/// `m(P)² |P|^{-1+1/n}` for a cube at `level`.
pub fn carleson_term(mass: f64, level: usize, dim: usize) -> f64 {
    let volume = 0.5f64.powi((level * dim) as i32);
    mass * mass * volume.powf(-1.0 + 1.0 / dim as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: usize,
    pub sidelength: f64,
    /// Largest ratio among cubes of this level.
    pub max_ratio: f64,
    pub nonempty_cubes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlesonResult {
    pub ratio: f64,
    pub witness: CubeRef,
    pub levels: Vec<LevelRow>,
}

/// Minimum number of levels below the roots for a meaningful ratio.
pub const MIN_LEVELS: usize = 3;

/// Maximises `S(P₀)/m(P₀)`, with cubes of zero mass contributing 0.
///
/// Ties go to the coarsest level, then the lowest index.
pub fn carleson_ratio(stats: &DyadicStats) -> Result<CarlesonResult> {
    let max_level = stats.max_level();
    if max_level < MIN_LEVELS {
        return Err(FormboundError::Alignment(format!(
            "need at least {MIN_LEVELS} dyadic levels, have {max_level}"
        )));
    }
    let n = stats.grid.dim();
    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); max_level + 1];
    acc[max_level] = stats.masses[max_level]
        .iter()
        .map(|&m| carleson_term(m, max_level, n))
        .collect();
    for level in (0..max_level).rev() {
        let row: Vec<f64> = stats.masses[level]
            .iter()
            .enumerate()
            .map(|(p, &m)| {
                let below: f64 = stats
                    .children(level, p)
                    .into_iter()
                    .map(|c| acc[level + 1][c])
                    .sum();
                carleson_term(m, level, n) + below
            })
            .collect();
        acc[level] = row;
    }

    let mut best = (0.0f64, 0usize, 0usize);
    let mut levels = Vec::with_capacity(max_level + 1);
    for level in 0..=max_level {
        let mut level_max = 0.0f64;
        let mut nonempty = 0;
        for (p, (&m, &s)) in stats.masses[level].iter().zip(&acc[level]).enumerate() {
            if m <= 0.0 {
                continue;
            }
            nonempty += 1;
            let r = s / m;
            level_max = level_max.max(r);
            if r > best.0 {
                best = (r, level, p);
            }
        }
        levels.push(LevelRow {
            level,
            sidelength: 0.5f64.powi(level as i32),
            max_ratio: level_max,
            nonempty_cubes: nonempty,
        });
    }
    Ok(CarlesonResult {
        ratio: best.0,
        witness: stats.cube(best.1, best.2),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use num_complex::Complex64;

    fn single_cell(dim: usize) -> (Field, f64) {
        // One root cube [-1/2, 1/2)^n split into 8 cells per axis, Φ = 1 on
        // the first cell only.
        let g = make_grid(dim, 8, 0.5).unwrap();
        let mut phi = Field::zeros(g);
        phi.values_mut()[0] = Complex64::new(1.0, 0.0);
        (phi, g.cell_volume())
    }

    #[test]
    fn parent_mass_is_sum_of_children() {
        let g = make_grid(2, 32, 2.0).unwrap();
        let phi = Field::from_fn(g, |x| Complex64::new((x[0] * 3.0).sin() + x[1], 0.0));
        let stats = build_dyadic_stats(&phi, 3).unwrap();
        for level in 0..3 {
            for p in 0..stats.masses(level).len() {
                let sum: f64 = stats
                    .children(level, p)
                    .into_iter()
                    .map(|c| stats.masses(level + 1)[c])
                    .sum();
                assert_eq!(stats.masses(level)[p], sum);
            }
        }
        let total: f64 = phi.squared_moduli().iter().sum::<f64>() * g.cell_volume();
        let roots: f64 = stats.masses(0).iter().sum();
        assert!((total - roots).abs() <= 1e-12 * total);
    }

    #[test]
    fn chain_in_one_dimension() {
        // Every cube on the chain has mass v = h, and the term is v² in 1D,
        // so the root collects 4v² and its ratio is 4v = 1/2.
        let (phi, v) = single_cell(1);
        let stats = build_dyadic_stats(&phi, 3).unwrap();
        let res = carleson_ratio(&stats).unwrap();
        assert!((res.ratio - 4.0 * v).abs() < 1e-15);
        assert!((res.ratio - 0.5).abs() < 1e-15);
        assert_eq!(res.witness, CubeRef { level: 0, index: vec![0] });
    }

    #[test]
    fn chain_in_two_dimensions() {
        // Terms v² 2^ℓ for ℓ = 0..3 give a root ratio of 15 v.
        let (phi, v) = single_cell(2);
        let stats = build_dyadic_stats(&phi, 3).unwrap();
        let res = carleson_ratio(&stats).unwrap();
        assert!((res.ratio - 15.0 * v).abs() < 1e-15);
        assert_eq!(res.witness.level, 0);
        assert_eq!(res.levels[3].max_ratio, v * 8.0);
    }

    #[test]
    fn zero_field_has_zero_ratio() {
        let g = make_grid(1, 64, 2.0).unwrap();
        let stats = build_dyadic_stats(&Field::zeros(g), 3).unwrap();
        assert_eq!(carleson_ratio(&stats).unwrap().ratio, 0.0);
    }

    #[test]
    fn alignment_errors() {
        let g = make_grid(1, 64, 1.3).unwrap();
        assert!(matches!(
            build_dyadic_stats(&Field::zeros(g), 2),
            Err(FormboundError::Alignment(_))
        ));
        let g = make_grid(1, 16, 2.0).unwrap();
        assert!(build_dyadic_stats(&Field::zeros(g), 3).is_err());
        let stats = build_dyadic_stats(&Field::zeros(g), 2).unwrap();
        assert!(carleson_ratio(&stats).is_err());
    }

    #[test]
    fn containment() {
        let a = CubeRef { level: 3, index: vec![5, 2] };
        let b = CubeRef { level: 1, index: vec![1, 0] };
        assert!(a.is_within(&b));
        assert!(!b.is_within(&a));
        assert!(!a.is_within(&CubeRef { level: 1, index: vec![0, 0] }));
    }

    #[test]
    fn finest_level_reaches_single_cells() {
        assert_eq!(finest_level(&make_grid(1, 64, 2.0).unwrap()).unwrap(), 4);
        assert_eq!(finest_level(&make_grid(2, 64, 0.5).unwrap()).unwrap(), 6);
        assert!(finest_level(&make_grid(1, 64, 1.5).unwrap()).is_err());
        assert!(finest_level(&make_grid(1, 64, 1.3).unwrap()).is_err());
    }
}
