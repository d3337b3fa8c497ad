//! Declarative potentials `Q` and the smoothed potential `Φ = (-Δ+1)^{-1/4} Q`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FormboundError, Result};
use crate::spectral::{apply_symbol, load_field, Field, Grid, Symbol};

/// A potential described by its shape rather than its samples.
///
/// Radial presets are centred at the origin and use the Euclidean `|x|`
/// of the sample coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        c: f64,
    },
    /// `min(|x|^{-β}, h^{-β})` on `|x| ≤ R`, zero outside.
    PowerLaw {
        beta: f64,
        cutoff_radius: f64,
    },
    /// `max(|x|, h)^{-α} sin(|x|^β)`.
    Oscillatory {
        amplitude_exponent: f64,
        phase_exponent: f64,
    },
    /// Unit-mass discrete deltas `w/h^n` at the nearest cells.
    DiracComb {
        centers: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Smooth compactly supported bump `exp(1 - 1/(1 - |x|²/R²))`, peak 1.
    Bump {
        radius: f64,
    },
    FromFile {
        path: PathBuf,
    },
    Scaled {
        c: f64,
        inner: Box<PotentialSpec>,
    },
}

impl PotentialSpec {
    pub fn scaled(self, c: f64) -> Self {
        PotentialSpec::Scaled {
            c,
            inner: Box::new(self),
        }
    }
}

fn radius(x: &[f64; 3], dim: usize) -> f64 {
    x[..dim].iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Samples `spec` on `grid`.
pub fn realize_potential(spec: &PotentialSpec, grid: &Grid) -> Result<Field> {
    let g = *grid;
    let n = g.dim();
    let h = g.spacing();
    match spec {
        PotentialSpec::Constant { c } => Ok(Field::constant(g, real(*c))),
        PotentialSpec::PowerLaw {
            beta,
            cutoff_radius,
        } => {
            if !(*beta > 0.0) || !(*cutoff_radius > 0.0) {
                return Err(FormboundError::Preset(format!(
                    "power law needs beta > 0 and R > 0, got beta={beta}, R={cutoff_radius}"
                )));
            }
            let (beta, cut) = (*beta, *cutoff_radius);
            Ok(Field::from_fn(g, |x| {
                let r = radius(x, n);
                if r <= cut {
                    real(r.max(h).powf(-beta))
                } else {
                    real(0.0)
                }
            }))
        }
        PotentialSpec::Oscillatory {
            amplitude_exponent,
            phase_exponent,
        } => {
            let (a, b) = (*amplitude_exponent, *phase_exponent);
            Ok(Field::from_fn(g, |x| {
                let r = radius(x, n).max(h);
                real(r.powf(-a) * r.powf(b).sin())
            }))
        }
        PotentialSpec::DiracComb { centers, weights } => {
            if centers.len() != weights.len() {
                return Err(FormboundError::Preset(format!(
                    "{} centers but {} weights",
                    centers.len(),
                    weights.len()
                )));
            }
            let mut field = Field::zeros(g);
            let cell = g.cell_volume();
            let l = g.half_length();
            for (c, &w) in centers.iter().zip(weights) {
                if c.len() != n {
                    return Err(FormboundError::Preset(format!(
                        "center {c:?} has {} coordinates, grid has {n}",
                        c.len()
                    )));
                }
                if !w.is_finite() {
                    return Err(FormboundError::Preset(format!("weight {w} is not finite")));
                }
                if c.iter().any(|&v| !(v >= -l && v < l)) {
                    return Err(FormboundError::Preset(format!(
                        "center {c:?} lies outside [-{l}, {l})"
                    )));
                }
                let idx: Vec<usize> = c.iter().map(|&v| g.nearest_index(v)).collect();
                field.values_mut()[g.flat_index(&idx)] += real(w / cell);
            }
            Ok(field)
        }
        PotentialSpec::Bump { radius: rad } => {
            if !(*rad > 0.0) {
                return Err(FormboundError::Preset(format!("bump radius {rad} must be > 0")));
            }
            let rad = *rad;
            Ok(Field::from_fn(g, |x| {
                let t = radius(x, n) / rad;
                if t < 1.0 {
                    real((1.0 - 1.0 / (1.0 - t * t)).exp())
                } else {
                    real(0.0)
                }
            }))
        }
        PotentialSpec::FromFile { path } => {
            let (_, field) = load_field(path)?;
            if field.grid() != grid {
                return Err(FormboundError::GridMismatch(format!(
                    "{} was written for {:?}, requested {:?}",
                    path.display(),
                    field.grid(),
                    grid
                )));
            }
            Ok(field)
        }
        PotentialSpec::Scaled { c, inner } => {
            Ok(realize_potential(inner, grid)?.scaled(real(*c)))
        }
    }
}

/// `Φ = (-Δ+1)^{-1/4} Q`.
pub fn compute_phi(q: &Field) -> Result<Field> {
    apply_symbol(q, Symbol::Bessel { s: 0.5 })
}

/// Parses the compact CLI syntax, e.g. `powerlaw:beta=0.5,R=1`,
/// `dirac:at=0/0;1/0.5,w=1;-1`, `2*bump:r=1` or `file:q.bin`.
impl FromStr for PotentialSpec {
    type Err = FormboundError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((factor, rest)) = s.split_once('*') {
            let c: f64 = factor
                .trim()
                .parse()
                .map_err(|_| FormboundError::Preset(format!("bad scale factor in {s:?}")))?;
            return Ok(rest.parse::<PotentialSpec>()?.scaled(c));
        }
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        if kind == "file" {
            return Ok(PotentialSpec::FromFile {
                path: PathBuf::from(args),
            });
        }
        let mut pairs = Vec::new();
        for part in args.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| FormboundError::Preset(format!("expected key=value, got {part:?}")))?;
            pairs.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let get = |keys: &[&str], default: Option<f64>| -> Result<f64> {
            match pairs.iter().find(|(k, _)| keys.contains(&k.as_str())) {
                Some((_, v)) => v
                    .parse()
                    .map_err(|_| FormboundError::Preset(format!("bad number {v:?} for {}", keys[0]))),
                None => default
                    .ok_or_else(|| FormboundError::Preset(format!("{kind} needs {}=", keys[0]))),
            }
        };
        match kind {
            "constant" | "const" => Ok(PotentialSpec::Constant {
                c: get(&["c", "value"], Some(1.0))?,
            }),
            "powerlaw" => Ok(PotentialSpec::PowerLaw {
                beta: get(&["beta"], None)?,
                cutoff_radius: get(&["r", "cutoff", "cutoff_radius"], Some(1.0))?,
            }),
            "osc" | "oscillatory" => Ok(PotentialSpec::Oscillatory {
                amplitude_exponent: get(&["alpha"], None)?,
                phase_exponent: get(&["beta"], None)?,
            }),
            "bump" => Ok(PotentialSpec::Bump {
                radius: get(&["r", "radius"], Some(1.0))?,
            }),
            "dirac" => {
                let list = |key: &str, default: &str| -> String {
                    pairs
                        .iter()
                        .find(|(k, _)| k == key)
                        .map(|(_, v)| v.clone())
                        .unwrap_or_else(|| default.to_string())
                };
                let parse = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| FormboundError::Preset(format!("bad number {v:?}")))
                };
                let centers = list("at", "0")
                    .split(';')
                    .map(|p| p.split('/').map(parse).collect::<Result<Vec<f64>>>())
                    .collect::<Result<Vec<_>>>()?;
                let weights = match pairs.iter().find(|(k, _)| k == "w") {
                    Some((_, v)) => v.split(';').map(parse).collect::<Result<Vec<f64>>>()?,
                    None => vec![1.0; centers.len()],
                };
                Ok(PotentialSpec::DiracComb { centers, weights })
            }
            other => Err(FormboundError::Preset(format!("unknown preset {other:?}"))),
        }
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Constant { c } => write!(f, "constant:c={c}"),
            PotentialSpec::PowerLaw {
                beta,
                cutoff_radius,
            } => write!(f, "powerlaw:beta={beta},R={cutoff_radius}"),
            PotentialSpec::Oscillatory {
                amplitude_exponent,
                phase_exponent,
            } => write!(f, "osc:alpha={amplitude_exponent},beta={phase_exponent}"),
            PotentialSpec::DiracComb { centers, weights } => {
                let at: Vec<String> = centers
                    .iter()
                    .map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/"))
                    .collect();
                let w: Vec<String> = weights.iter().map(|v| v.to_string()).collect();
                write!(f, "dirac:at={},w={}", at.join(";"), w.join(";"))
            }
            PotentialSpec::Bump { radius } => write!(f, "bump:r={radius}"),
            PotentialSpec::FromFile { path } => write!(f, "file:{}", path.display()),
            PotentialSpec::Scaled { c, inner } => write!(f, "{c}*{inner}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{bessel_kernel_g, make_grid, save_field, FieldDtype};

    #[test]
    fn constant_preset() {
        let g = make_grid(2, 8, 1.0).unwrap();
        let q = realize_potential(&PotentialSpec::Constant { c: 3.5 }, &g).unwrap();
        assert!(q.values().iter().all(|v| *v == real(3.5)));
    }

    #[test]
    fn dirac_has_unit_mass() {
        let g = make_grid(1, 16, 8.0).unwrap();
        let spec = PotentialSpec::DiracComb {
            centers: vec![vec![0.0]],
            weights: vec![1.0],
        };
        let q = realize_potential(&spec, &g).unwrap();
        for (j, v) in q.values().iter().enumerate() {
            let expect = if g.coordinate(j) == 0.0 { 1.0 } else { 0.0 };
            assert_eq!(v.re, expect);
        }
        let mass: f64 = q.values().iter().map(|v| v.re).sum::<f64>() * g.cell_volume();
        assert_eq!(mass, 1.0);
    }

    #[test]
    fn dirac_rejects_outside_centres() {
        let g = make_grid(1, 16, 1.0).unwrap();
        let spec = PotentialSpec::DiracComb {
            centers: vec![vec![1.5]],
            weights: vec![1.0],
        };
        assert!(realize_potential(&spec, &g).is_err());
    }

    #[test]
    fn scaled_matches_constant() {
        let g = make_grid(1, 16, 2.0).unwrap();
        let a = realize_potential(&PotentialSpec::Constant { c: 1.0 }.scaled(2.0), &g).unwrap();
        let b = realize_potential(&PotentialSpec::Constant { c: 2.0 }, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn power_law_is_capped_and_cut() {
        let g = make_grid(1, 32, 2.0).unwrap();
        let q = realize_potential(
            &PotentialSpec::PowerLaw {
                beta: 0.5,
                cutoff_radius: 1.0,
            },
            &g,
        )
        .unwrap();
        let h = g.spacing();
        assert_eq!(q.values()[g.origin_index()].re, h.powf(-0.5));
        assert_eq!(q.values()[0].re, 0.0);
        assert!(q.max_modulus() <= h.powf(-0.5));
    }

    #[test]
    fn phi_of_trivial_potentials() {
        let g = make_grid(2, 16, 2.0).unwrap();
        let z = compute_phi(&Field::zeros(g)).unwrap();
        assert!(z.is_zero());
        let c = compute_phi(&Field::constant(g, real(-1.25))).unwrap();
        assert!(c.values().iter().all(|v| (v - real(-1.25)).norm() < 1e-13));
    }

    #[test]
    fn phi_of_dirac_matches_bessel_kernel() {
        let g = make_grid(1, 1024, 8.0).unwrap();
        let q = realize_potential(
            &PotentialSpec::DiracComb {
                centers: vec![vec![0.0]],
                weights: vec![1.0],
            },
            &g,
        )
        .unwrap();
        let phi = compute_phi(&q).unwrap();
        let h = g.spacing();
        let o = g.origin_index();
        let mut worst = 0.0f64;
        for k in 4..=(g.points() / 8) {
            let r = k as f64 * h;
            if r > g.half_length() / 2.0 {
                break;
            }
            let exact = bessel_kernel_g(0.5, 1, r).unwrap();
            let got = phi.values()[o + k].re;
            worst = worst.max(((got - exact) / exact).abs());
        }
        assert!(worst <= 0.05, "worst relative error {worst}");
    }

    #[test]
    fn phi_is_linear_and_real() {
        let g = make_grid(2, 32, 2.0).unwrap();
        let spec = PotentialSpec::PowerLaw {
            beta: 0.5,
            cutoff_radius: 1.0,
        };
        let q = realize_potential(&spec, &g).unwrap();
        let phi = compute_phi(&q).unwrap();
        assert!(phi.max_imag() <= 1e-12 * phi.max_modulus());
        let phi3 = compute_phi(&realize_potential(&spec.clone().scaled(-3.0), &g).unwrap()).unwrap();
        let scale = phi3.max_modulus();
        for (a, b) in phi3.values().iter().zip(phi.values()) {
            assert!((a - b * -3.0).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn phi_refinement_is_at_least_second_order() {
        let spec = PotentialSpec::Bump { radius: 2.0 };
        let phi_on = |n: usize| {
            let g = make_grid(1, n, 4.0).unwrap();
            compute_phi(&realize_potential(&spec, &g).unwrap()).unwrap()
        };
        let ladder: Vec<Field> = [16, 32, 64, 128].iter().map(|&n| phi_on(n)).collect();
        let errs: Vec<f64> = ladder
            .windows(2)
            .map(|w| {
                w[0].values()
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (v - w[1].values()[2 * j]).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        for pair in errs.windows(2) {
            let slope = (pair[0] / pair[1]).log2();
            assert!(slope >= 1.8, "errors {errs:?}");
        }
    }

    #[test]
    fn from_file_round_trip_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        let g = make_grid(1, 16, 2.0).unwrap();
        let q = realize_potential(&PotentialSpec::Bump { radius: 1.0 }, &g).unwrap();
        save_field(&path, &q, FieldDtype::C128).unwrap();
        let spec = PotentialSpec::FromFile { path: path.clone() };
        assert_eq!(realize_potential(&spec, &g).unwrap(), q);
        let other = make_grid(1, 32, 2.0).unwrap();
        assert!(matches!(
            realize_potential(&spec, &other),
            Err(FormboundError::GridMismatch(_))
        ));
        let missing = PotentialSpec::FromFile {
            path: dir.path().join("nope.bin"),
        };
        assert!(matches!(realize_potential(&missing, &g), Err(FormboundError::Io(_))));
    }

    #[test]
    fn preset_syntax() {
        let p: PotentialSpec = "powerlaw:beta=0.5,R=1".parse().unwrap();
        assert_eq!(
            p,
            PotentialSpec::PowerLaw {
                beta: 0.5,
                cutoff_radius: 1.0
            }
        );
        let d: PotentialSpec = "dirac:at=0/0;1/-0.5,w=1;-2".parse().unwrap();
        assert_eq!(
            d,
            PotentialSpec::DiracComb {
                centers: vec![vec![0.0, 0.0], vec![1.0, -0.5]],
                weights: vec![1.0, -2.0]
            }
        );
        let s: PotentialSpec = "2*bump:r=0.5".parse().unwrap();
        assert_eq!(s, PotentialSpec::Bump { radius: 0.5 }.scaled(2.0));
        for spec in [p, d, s] {
            assert_eq!(spec.to_string().parse::<PotentialSpec>().unwrap(), spec);
        }
        assert!("wobble:x=1".parse::<PotentialSpec>().is_err());
        assert!("powerlaw:R=1".parse::<PotentialSpec>().is_err());
    }
}
