//! Regular latitude/longitude grids and the binary field format.
//!
//! Field file layout, little-endian:
//!
//! ```text
//! magic       8 bytes  "NWPGRID\0"
//! version     u32
//! flags       u32      bit 0: field is an unmodified fallback
//! lat_min, lat_max, lon_min, lon_max, resolution   5 × f64
//! init_time, valid_time                            2 × i64 hours since epoch
//! u           n_nodes × f32, row-major, latitude slowest
//! v           n_nodes × f32
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoBox, GeoCoord};
use crate::time::TimeStamp;
use crate::wind::WindVector;

pub const GRID_MAGIC: &[u8; 8] = b"NWPGRID\0";
pub const GRID_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 4 + 5 * 8 + 2 * 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub resolution: f64,
}

fn steps(span: f64, res: f64) -> Option<usize> {
    let n = span / res;
    let r = n.round();
    ((n - r).abs() <= 1e-9 && r >= 0.0).then_some(r as usize)
}

impl GridSpec {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64, resolution: f64) -> Result<Self> {
        let g = GridSpec {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
            resolution,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid covering `b` at `resolution`, bounds snapped outward.
    pub fn covering(b: &GeoBox, resolution: f64) -> Result<Self> {
        let down = |x: f64| (x / resolution).floor() * resolution;
        let up = |x: f64| (x / resolution).ceil() * resolution;
        GridSpec::new(
            down(b.lat_min).max(-90.0),
            up(b.lat_max).min(90.0),
            down(b.lon_min),
            up(b.lon_max),
            resolution,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.lat_min, self.lat_max, self.lon_min, self.lon_max, self.resolution];
        if vals.iter().any(|v| !v.is_finite()) || !(self.resolution > 0.0) {
            return Err(Error::InvalidArgument("grid bounds must be finite and resolution positive".into()));
        }
        if self.lat_min > self.lat_max || self.lon_min > self.lon_max {
            return Err(Error::InvalidArgument("grid minimum exceeds maximum".into()));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 || self.lon_min < -180.0 || self.lon_max >= 180.0 {
            return Err(Error::InvalidArgument(
                "grid must lie within lat [-90, 90] and lon [-180, 180)".into(),
            ));
        }
        if steps(self.lat_max - self.lat_min, self.resolution).is_none()
            || steps(self.lon_max - self.lon_min, self.resolution).is_none()
        {
            return Err(Error::InvalidArgument(format!(
                "grid extent is not a multiple of resolution {}",
                self.resolution
            )));
        }
        Ok(())
    }

    pub fn n_lat(&self) -> usize {
        steps(self.lat_max - self.lat_min, self.resolution).expect("validated") + 1
    }

    pub fn n_lon(&self) -> usize {
        steps(self.lon_max - self.lon_min, self.resolution).expect("validated") + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.n_lat() * self.n_lon()
    }

    pub fn lat_at(&self, i: usize) -> f64 {
        self.lat_min + i as f64 * self.resolution
    }

    pub fn lon_at(&self, j: usize) -> f64 {
        self.lon_min + j as f64 * self.resolution
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i * self.n_lon() + j
    }

    pub fn node_coord(&self, k: usize) -> GeoCoord {
        let (i, j) = (k / self.n_lon(), k % self.n_lon());
        GeoCoord::new(self.lat_at(i), self.lon_at(j)).expect("grid lies inside valid ranges")
    }

    pub fn node_coords(&self) -> Vec<GeoCoord> {
        (0..self.n_nodes()).map(|k| self.node_coord(k)).collect()
    }

    pub fn bounds(&self) -> GeoBox {
        GeoBox {
            lat_min: self.lat_min,
            lat_max: self.lat_max,
            lon_min: self.lon_min,
            lon_max: self.lon_max,
        }
    }

    fn nearest_axis(&self, x: f64, min: f64, n: usize) -> Option<usize> {
        let f = (x - min) / self.resolution;
        if f < -0.5 || f > (n - 1) as f64 + 0.5 {
            return None;
        }
        // ceil(f − ½) rounds to nearest with exact halves going down.
        let k = (f - 0.5).ceil().max(0.0) as usize;
        Some(k.min(n - 1))
    }

    /// Nearest node by separate latitude and longitude index rounding; ties
    /// go to the lower index. Coordinates more than half a cell outside the
    /// grid are rejected.
    pub fn nearest_node(&self, c: &GeoCoord) -> Result<usize> {
        let i = self.nearest_axis(c.lat(), self.lat_min, self.n_lat());
        let j = self.nearest_axis(c.lon(), self.lon_min, self.n_lon());
        match (i, j) {
            (Some(i), Some(j)) => Ok(self.node_index(i, j)),
            _ => Err(Error::OutsideGrid {
                lat: c.lat(),
                lon: c.lon(),
            }),
        }
    }
}

/// Gridded wind field valid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub init_time: TimeStamp,
    pub valid_time: TimeStamp,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Set when the field is a pass-through of its input.
    pub fallback: bool,
}

impl GridField {
    pub fn new(spec: GridSpec, init_time: TimeStamp, valid_time: TimeStamp, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if valid_time < init_time {
            return Err(Error::InvalidArgument("valid time precedes init time".into()));
        }
        if u.len() != spec.n_nodes() || v.len() != spec.n_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} / {} values for {} nodes",
                u.len(),
                v.len(),
                spec.n_nodes()
            )));
        }
        Ok(GridField {
            spec,
            init_time,
            valid_time,
            u,
            v,
            fallback: false,
        })
    }

    pub fn forecast_hour(&self) -> i64 {
        self.valid_time.hours_since(self.init_time)
    }

    pub fn at_node(&self, k: usize) -> WindVector {
        WindVector {
            u: self.u[k],
            v: self.v[k],
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(HEADER_LEN + 8 * self.u.len());
        b.extend_from_slice(GRID_MAGIC);
        b.extend_from_slice(&GRID_VERSION.to_le_bytes());
        b.extend_from_slice(&u32::from(self.fallback).to_le_bytes());
        let s = &self.spec;
        for x in [s.lat_min, s.lat_max, s.lon_min, s.lon_max, s.resolution] {
            b.extend_from_slice(&x.to_le_bytes());
        }
        b.extend_from_slice(&self.init_time.hours().to_le_bytes());
        b.extend_from_slice(&self.valid_time.hours().to_le_bytes());
        for x in self.u.iter().chain(&self.v) {
            b.extend_from_slice(&(*x as f32).to_le_bytes());
        }
        b
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let corrupt = |m: String| Error::Corrupt {
            path: origin.to_path_buf(),
            message: m,
        };
        if bytes.len() < HEADER_LEN {
            return Err(corrupt(format!("{} bytes, shorter than the header", bytes.len())));
        }
        if &bytes[..8] != GRID_MAGIC {
            return Err(corrupt("bad magic bytes".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("len"));
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("len"));
        let i64_at = |o: usize| i64::from_le_bytes(bytes[o..o + 8].try_into().expect("len"));
        let version = u32_at(8);
        if version != GRID_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: GRID_VERSION,
            });
        }
        let flags = u32_at(12);
        let spec = GridSpec::new(f64_at(16), f64_at(24), f64_at(32), f64_at(40), f64_at(48))
            .map_err(|e| corrupt(e.to_string()))?;
        let init = TimeStamp::from_hours(i64_at(56));
        let valid = TimeStamp::from_hours(i64_at(64));
        let n = spec.n_nodes();
        if bytes.len() != HEADER_LEN + 8 * n {
            return Err(corrupt(format!(
                "{} bytes, expected {} for {n} nodes",
                bytes.len(),
                HEADER_LEN + 8 * n
            )));
        }
        let vals: Vec<f64> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("len")) as f64)
            .collect();
        let (u, v) = vals.split_at(n);
        let mut f = GridField::new(spec, init, valid, u.to_vec(), v.to_vec()).map_err(|e| corrupt(e.to_string()))?;
        f.fallback = flags & 1 == 1;
        Ok(f)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Values rounded through `f32`, as they are after a file round trip.
    pub fn quantized(mut self) -> Self {
        for x in self.u.iter_mut().chain(self.v.iter_mut()) {
            *x = *x as f32 as f64;
        }
        self
    }
}

/// Value at the nearest grid node.
pub fn nearest_grid_sample(field: &GridField, coord: &GeoCoord) -> Result<WindVector> {
    Ok(field.at_node(field.spec.nearest_node(coord)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::new(-10.0, 10.0, -40.0, -20.0, 1.0).unwrap()
    }

    fn field() -> GridField {
        let s = spec();
        let n = s.n_nodes();
        GridField::new(
            s,
            TimeStamp::from_hours(0),
            TimeStamp::from_hours(3),
            (0..n).map(|k| k as f64).collect(),
            (0..n).map(|k| -(k as f64)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn counts_and_divisibility() {
        assert_eq!(spec().n_nodes(), 21 * 21);
        assert_eq!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 0.25).unwrap().n_nodes(), 25);
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.1, 0.25).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 180.0, 1.0).is_err());
    }

    #[test]
    fn exact_node_and_tie_rule() {
        let f = field();
        let s = f.spec;
        let c = GeoCoord::new(3.0, -25.0).unwrap();
        let k = s.nearest_node(&c).unwrap();
        assert_eq!(s.node_coord(k), c);
        // cell centre: both indices round down
        let k = s.nearest_node(&GeoCoord::new(3.5, -25.5).unwrap()).unwrap();
        assert_eq!(s.node_coord(k), GeoCoord::new(3.0, -26.0).unwrap());
        assert_eq!(nearest_grid_sample(&f, &c).unwrap(), f.at_node(s.node_index(13, 15)));
    }

    #[test]
    fn margin_of_half_a_cell() {
        let s = spec();
        assert!(s.nearest_node(&GeoCoord::new(10.5, -20.0).unwrap()).is_ok());
        assert!(matches!(
            s.nearest_node(&GeoCoord::new(10.6, -20.0).unwrap()),
            Err(Error::OutsideGrid { .. })
        ));
        let k = s.nearest_node(&GeoCoord::new(-10.5, -40.5).unwrap()).unwrap();
        assert_eq!(k, 0);
    }

    #[test]
    fn file_round_trip_and_truncation() {
        let mut f = field();
        f.fallback = true;
        let bytes = f.to_bytes();
        let g = GridField::from_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(g, f.clone().quantized());
        assert!(g.fallback);
        assert!(matches!(
            GridField::from_bytes(&bytes[..bytes.len() - 3], Path::new("x")),
            Err(Error::Corrupt { .. })
        ));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(
            GridField::from_bytes(&bad, Path::new("x")),
            Err(Error::VersionMismatch { .. })
        ));
    }

    #[test]
    fn covering_box() {
        let b = GeoBox {
            lat_min: -9.3,
            lat_max: 9.2,
            lon_min: -39.5,
            lon_max: -20.1,
        };
        let g = GridSpec::covering(&b, 1.0).unwrap();
        assert_eq!((g.lat_min, g.lat_max, g.lon_min, g.lon_max), (-10.0, 10.0, -40.0, -20.0));
    }
}
