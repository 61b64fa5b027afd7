use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Category of observing system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlatformType {
    Ship,
    DriftingBuoy,
    MooredBuoy,
    CmanStation,
    CoastalStation,
    TideGauge,
    FixedPlatform,
}

impl PlatformType {
    pub const ALL: [PlatformType; 7] = [
        PlatformType::Ship,
        PlatformType::DriftingBuoy,
        PlatformType::MooredBuoy,
        PlatformType::CmanStation,
        PlatformType::CoastalStation,
        PlatformType::TideGauge,
        PlatformType::FixedPlatform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlatformType::Ship => "ship",
            PlatformType::DriftingBuoy => "drifting_buoy",
            PlatformType::MooredBuoy => "moored_buoy",
            PlatformType::CmanStation => "cman_station",
            PlatformType::CoastalStation => "coastal_station",
            PlatformType::TideGauge => "tide_gauge",
            PlatformType::FixedPlatform => "fixed_platform",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Platforms that report from a fixed location.
    pub fn is_stationary(self) -> bool {
        !matches!(self, PlatformType::Ship | PlatformType::DriftingBuoy)
    }
}

impl fmt::Display for PlatformType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlatformType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PlatformType::ALL
            .into_iter()
            .find(|p| p.as_str() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown platform type '{s}'")))
    }
}
