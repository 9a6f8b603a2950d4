//! Binary grids, CSV tables and deterministic JSON.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{ConeError, Result};
use crate::model_geometry::MetricField;
use crate::solver::PotentialField;

pub const GRID_MAGIC: &[u8; 8] = b"CKGRID01";

/// Row-major `f64` array with its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryGrid {
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

impl BinaryGrid {
    pub fn new(dims: Vec<u64>, data: Vec<f64>) -> Result<Self> {
        let n: u64 = dims.iter().product();
        if n as usize != data.len() {
            return Err(ConeError::DomainMismatch(format!("shape {dims:?} holds {n} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    /// Layout: magic, `u32` rank, `rank` x `u64` dims, then the values; all
    /// little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(GRID_MAGIC)?;
        w.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != GRID_MAGIC {
            return Err(ConeError::Report("not a CKGRID01 file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let rank = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut b8)?;
            dims.push(u64::from_le_bytes(b8));
        }
        let n: u64 = dims.iter().product();
        let mut data = Vec::with_capacity(n as usize);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            data.push(f64::from_le_bytes(b8));
        }
        Self::new(dims, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Shape `[radial, transverse]`.
pub fn potential_grid(phi: &PotentialField) -> BinaryGrid {
    let (nr, nt) = phi.domain.shape();
    BinaryGrid {
        dims: vec![nr as u64, nt as u64],
        data: phi.values.clone(),
    }
}

/// Shape `[radial, transverse, n, n, 2]`, the last axis holding re/im.
pub fn metric_grid(m: &MetricField) -> BinaryGrid {
    let (nr, nt) = m.domain.shape();
    let n = m.dim();
    let mut data = Vec::with_capacity(m.len() * n * n * 2);
    for g in &m.matrices {
        for a in 0..n {
            for b in 0..n {
                data.push(g[(a, b)].re);
                data.push(g[(a, b)].im);
            }
        }
    }
    BinaryGrid {
        dims: vec![nr as u64, nt as u64, n as u64, n as u64, 2],
        data,
    }
}

/// Write rows with a header; floats use 17 significant digits.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<CsvCell>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ConeError::Report(e.to_string()))?;
    w.write_record(header).map_err(|e| ConeError::Report(e.to_string()))?;
    for row in rows {
        let rec: Vec<String> = row.iter().map(CsvCell::render).collect();
        w.write_record(&rec).map_err(|e| ConeError::Report(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum CsvCell {
    Num(f64),
    Text(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            CsvCell::Num(v) => fmt_f64(*v),
            CsvCell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for CsvCell {
    fn from(v: f64) -> Self {
        CsvCell::Num(v)
    }
}

impl From<&str> for CsvCell {
    fn from(v: &str) -> Self {
        CsvCell::Text(v.to_string())
    }
}

impl From<String> for CsvCell {
    fn from(v: String) -> Self {
        CsvCell::Text(v)
    }
}

/// 17 significant digits; non-finite values print as `nan` / `inf`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Pretty JSON with every float at 17 significant digits. Non-finite
/// floats become `null` (serde_json's rule).
struct Fixed17<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(format!("{v:.16e}").as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_geometry::DomainSpec;

    #[test]
    fn grid_round_trip() {
        let d = DomainSpec::model(2, 0.5, 0.0, 1.0, 5).with_smooth(1.0, 3);
        let phi = PotentialField::from_fn(&d, |p| p[0].norm() + p[1].re);
        let g = potential_grid(&phi);
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], GRID_MAGIC);
        assert_eq!(buf.len(), 8 + 4 + 2 * 8 + 15 * 8);
        assert_eq!(BinaryGrid::read_from(&buf[..]).unwrap(), g);
        buf[0] = b'X';
        assert!(BinaryGrid::read_from(&buf[..]).is_err());
    }

    #[test]
    fn json_floats_and_nonfinite() {
        let v = serde_json::json!({"a": 0.1, "b": [1.0, -2.5e-300], "n": 3});
        let s = to_json_string(&v).unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.5000000000000000e-300"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        #[derive(Serialize)]
        struct T {
            x: f64,
        }
        assert!(to_json_string(&T { x: f64::NAN }).unwrap().contains("null"));
    }

    #[test]
    fn csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_csv(&p, &["x", "tag"], &[vec![0.5.into(), "a".into()]]).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "x,tag\n5.0000000000000000e-1,a\n");
    }
}
