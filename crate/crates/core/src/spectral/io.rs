//! Field files: one JSON header line, then little-endian row-major samples.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Field, Grid};
use crate::error::{FormboundError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldDtype {
    /// Real parts only.
    F64,
    /// Interleaved `(re, im)` pairs.
    C128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub dim: usize,
    pub points: usize,
    pub half_length: f64,
    pub dtype: FieldDtype,
    pub order: String,
    pub endian: String,
}

impl FieldHeader {
    pub fn for_grid(grid: &Grid, dtype: FieldDtype) -> Self {
        Self {
            dim: grid.dim(),
            points: grid.points(),
            half_length: grid.half_length(),
            dtype,
            order: "row-major".into(),
            endian: "little".into(),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        if self.order != "row-major" || self.endian != "little" {
            return Err(FormboundError::Format(format!(
                "unsupported layout {}/{}",
                self.order, self.endian
            )));
        }
        Grid::new(self.dim, self.points, self.half_length)
    }
}

pub fn write_field<W: Write>(mut w: W, field: &Field, dtype: FieldDtype) -> Result<()> {
    let header = FieldHeader::for_grid(field.grid(), dtype);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for v in field.values() {
        w.write_all(&v.re.to_le_bytes())?;
        if dtype == FieldDtype::C128 {
            w.write_all(&v.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<(FieldHeader, Field)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| FormboundError::Format(format!("bad header: {e}")))?;
    let grid = header.grid()?;
    let per = match header.dtype {
        FieldDtype::F64 => 8,
        FieldDtype::C128 => 16,
    };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != per * grid.len() {
        return Err(FormboundError::Format(format!(
            "expected {} payload bytes, found {}",
            per * grid.len(),
            bytes.len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let values = bytes
        .chunks_exact(per)
        .map(|c| match header.dtype {
            FieldDtype::F64 => Complex64::new(f(c), 0.0),
            FieldDtype::C128 => Complex64::new(f(&c[..8]), f(&c[8..])),
        })
        .collect();
    let field = Field::from_complex(grid, values)?;
    Ok((header, field))
}

pub fn save_field(path: impl AsRef<Path>, field: &Field, dtype: FieldDtype) -> Result<()> {
    write_field(BufWriter::new(File::create(path)?), field, dtype)
}

pub fn load_field(path: impl AsRef<Path>) -> Result<(FieldHeader, Field)> {
    read_field(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip(vals in proptest::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 16)) {
            let grid = Grid::new(1, 16, 2.5).unwrap();
            let field = Field::from_complex(
                grid,
                vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect(),
            ).unwrap();
            let mut buf = Vec::new();
            write_field(&mut buf, &field, FieldDtype::C128).unwrap();
            let (header, back) = read_field(&buf[..]).unwrap();
            prop_assert_eq!(header.dtype, FieldDtype::C128);
            prop_assert_eq!(back, field.clone());

            let mut buf = Vec::new();
            write_field(&mut buf, &field, FieldDtype::F64).unwrap();
            let (_, real) = read_field(&buf[..]).unwrap();
            prop_assert_eq!(real.real_parts(), field.real_parts());
            prop_assert_eq!(real.max_imag(), 0.0);
        }
    }

    #[test]
    fn header_shape() {
        let grid = Grid::new(2, 8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::zeros(grid), FieldDtype::F64).unwrap();
        let line = buf.split(|&b| b == b'\n').next().unwrap();
        let v: serde_json::Value = serde_json::from_slice(line).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["points"], 8);
        assert_eq!(v["dtype"], "f64");
        assert_eq!(v["order"], "row-major");
        assert_eq!(v["endian"], "little");
        assert_eq!(buf.len(), line.len() + 1 + 64 * 8);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let grid = Grid::new(1, 8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::zeros(grid), FieldDtype::C128).unwrap();
        buf.pop();
        assert!(matches!(read_field(&buf[..]), Err(FormboundError::Format(_))));
    }
}
