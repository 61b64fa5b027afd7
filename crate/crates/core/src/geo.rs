//! Geographic coordinates on a spherical Earth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Latitude in [−90, 90] and longitude normalised into [−180, 180), degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    lat: f64,
    lon: f64,
}

pub fn normalize_lon(lon: f64) -> f64 {
    if (-180.0..180.0).contains(&lon) {
        return lon;
    }
    let mut l = lon;
    while l >= 180.0 {
        l -= 360.0;
    }
    while l < -180.0 {
        l += 360.0;
    }
    l
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite coordinate ({lat}, {lon})")));
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidArgument(format!("latitude {lat} outside [-90, 90]")));
        }
        Ok(GeoCoord {
            lat,
            lon: normalize_lon(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Great-circle distance in kilometres.
    pub fn haversine_km(&self, other: &GeoCoord) -> f64 {
        let (p1, p2) = (self.lat.to_radians(), other.lat.to_radians());
        let dp = p2 - p1;
        let dl = (other.lon - self.lon).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
    }

    /// Great-circle distance in degrees of arc.
    pub fn arc_deg(&self, other: &GeoCoord) -> f64 {
        (self.haversine_km(other) / EARTH_RADIUS_KM).to_degrees()
    }
}

/// Axis-aligned latitude/longitude box (inclusive bounds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl GeoBox {
    pub fn contains(&self, c: &GeoCoord) -> bool {
        (self.lat_min..=self.lat_max).contains(&c.lat()) && (self.lon_min..=self.lon_max).contains(&c.lon())
    }

    pub fn expand(&self, margin: f64) -> GeoBox {
        GeoBox {
            lat_min: (self.lat_min - margin).max(-90.0),
            lat_max: (self.lat_max + margin).min(90.0),
            lon_min: self.lon_min - margin,
            lon_max: self.lon_max + margin,
        }
    }
}
