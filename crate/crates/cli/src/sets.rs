//! Command-line syntax for sets and set families.
//!
//! Sets: `ball:r=0.25`, `ball:r=0.25,at=0.5/0`, `file:mask.bin`.
//! Families: `levelsets:5`, `balls:r=0.1;0.2;0.4`.

use std::path::PathBuf;
use std::str::FromStr;

use formbound_core::capacity::{ball_family, superlevel_family, SetMask};
use formbound_core::spectral::{load_field, Field, Grid};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SetSpec {
    Ball { radius: f64, center: Option<Vec<f64>> },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Levelsets(usize),
    Balls(Vec<f64>),
}

fn bad(s: &str, why: &str) -> CliError {
    CliError::Argument(format!("`{s}`: {why}"))
}

fn number(s: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(s, &format!("`{v}` is not a number")))
}

impl FromStr for SetSpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| bad(s, "expected `kind:args`"))?;
        match kind {
            "file" if !rest.is_empty() => Ok(SetSpec::File(rest.into())),
            "ball" => {
                let mut radius = None;
                let mut center = None;
                for part in rest.split(',') {
                    match part.split_once('=') {
                        Some(("r", v)) => radius = Some(number(s, v)?),
                        Some(("at", v)) => {
                            center = Some(v.split('/').map(|c| number(s, c)).collect::<Result<Vec<_>>>()?)
                        }
                        _ => return Err(bad(s, &format!("unexpected `{part}`"))),
                    }
                }
                let radius = radius.ok_or_else(|| bad(s, "missing `r=`"))?;
                Ok(SetSpec::Ball { radius, center })
            }
            _ => Err(bad(s, "expected `ball:` or `file:`")),
        }
    }
}

impl SetSpec {
    pub fn realize(&self, grid: Grid) -> Result<SetMask> {
        match self {
            SetSpec::Ball { radius, center } => {
                let origin = vec![0.0; grid.dim()];
                let c = center.as_deref().unwrap_or(&origin);
                Ok(SetMask::ball(grid, c, *radius)?)
            }
            SetSpec::File(path) => {
                let (_, field) = load_field(path)?;
                if field.grid() != &grid {
                    return Err(CliError::Argument(format!(
                        "{} holds a mask for {:?}, requested {:?}",
                        path.display(),
                        field.grid(),
                        grid
                    )));
                }
                let mask = field.values().iter().map(|v| v.norm() != 0.0).collect();
                Ok(SetMask::new(grid, mask)?)
            }
        }
    }
}

impl FromStr for FamilySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("levelsets", v)) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .map(FamilySpec::Levelsets)
                .ok_or_else(|| bad(s, "expected a positive count")),
            Some(("balls", v)) => {
                let v = v.strip_prefix("r=").unwrap_or(v);
                let radii = v.split(';').map(|r| number(s, r)).collect::<Result<Vec<_>>>()?;
                Ok(FamilySpec::Balls(radii))
            }
            _ => Err(bad(s, "expected `levelsets:k` or `balls:r=a;b;…`")),
        }
    }
}

impl FamilySpec {
    pub fn realize(&self, phi: &Field) -> Result<Vec<SetMask>> {
        Ok(match self {
            FamilySpec::Levelsets(k) => superlevel_family(phi, *k)?,
            FamilySpec::Balls(radii) => ball_family(*phi.grid(), radii)?,
        })
    }
}
