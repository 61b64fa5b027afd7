use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sanity bound on wind speed, m/s.
pub const MAX_WIND_SPEED: f64 = 150.0;

/// Horizontal 10 m wind: `u` eastward, `v` northward, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WindVector {
    pub u: f64,
    pub v: f64,
}

impl WindVector {
    pub const ZERO: WindVector = WindVector { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Result<Self> {
        let w = WindVector { u, v };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.u.is_finite() || !self.v.is_finite() {
            return Err(Error::NonFinite(format!("wind ({}, {})", self.u, self.v)));
        }
        if self.speed() >= MAX_WIND_SPEED {
            return Err(Error::InvalidArgument(format!(
                "wind speed {:.1} m/s exceeds the {MAX_WIND_SPEED} m/s sanity bound",
                self.speed()
            )));
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn sub(&self, other: &WindVector) -> WindVector {
        WindVector {
            u: self.u - other.u,
            v: self.v - other.v,
        }
    }

    pub fn add(&self, other: &WindVector) -> WindVector {
        WindVector {
            u: self.u + other.u,
            v: self.v + other.v,
        }
    }
}
