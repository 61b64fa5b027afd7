//! Hour-resolution UTC timestamps.

use std::fmt;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A UTC instant rounded to the hour, stored as hours since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TimeStamp(i64);

/// GFS-style forecast cycles run every six hours.
pub const CYCLE_HOURS: i64 = 6;

impl TimeStamp {
    pub const fn from_hours(hours_since_epoch: i64) -> Self {
        TimeStamp(hours_since_epoch)
    }

    pub fn from_ymdh(year: i32, month: u32, day: u32, hour: u32) -> Result<Self> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| Error::InvalidArgument(format!("invalid date {year}-{month}-{day}")))?;
        let dt = date
            .and_hms_opt(hour, 0, 0)
            .ok_or_else(|| Error::InvalidArgument(format!("invalid hour {hour}")))?;
        Ok(Self::from_naive_rounded(dt))
    }

    /// Rounds to the nearest hour; minutes ≥ 30 round up.
    pub fn from_naive_rounded(dt: NaiveDateTime) -> Self {
        let secs = dt.and_utc().timestamp();
        let hours = secs.div_euclid(3600);
        let rem = secs.rem_euclid(3600);
        TimeStamp(if rem >= 1800 { hours + 1 } else { hours })
    }

    /// Parses `YYYY-MM-DDTHH:MM[:SS][Z]` (also accepts a space separator),
    /// rounding to the nearest hour.
    pub fn parse_iso(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            return Ok(Self::from_naive_rounded(dt.naive_utc()));
        }
        let body = s.strip_suffix('Z').unwrap_or(s);
        for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
            if let Ok(dt) = NaiveDateTime::parse_from_str(body, fmt) {
                return Ok(Self::from_naive_rounded(dt));
            }
        }
        Err(Error::InvalidArgument(format!("unparseable timestamp '{s}'")))
    }

    pub fn hours(self) -> i64 {
        self.0
    }

    fn naive(self) -> NaiveDateTime {
        DateTime::from_timestamp(self.0 * 3600, 0)
            .expect("timestamp within chrono range")
            .naive_utc()
    }

    pub fn year(self) -> i32 {
        self.naive().year()
    }

    /// 1-based day of year.
    pub fn day_of_year(self) -> u32 {
        self.naive().ordinal()
    }

    pub fn hour_of_day(self) -> u32 {
        self.0.rem_euclid(24) as u32
    }

    pub fn add_hours(self, h: i64) -> Self {
        TimeStamp(self.0 + h)
    }

    /// Signed hour difference `self − other`.
    pub fn hours_since(self, other: TimeStamp) -> i64 {
        self.0 - other.0
    }

    /// Latest forecast-cycle initialisation at or before this instant.
    pub fn cycle_floor(self) -> Self {
        TimeStamp(self.0.div_euclid(CYCLE_HOURS) * CYCLE_HOURS)
    }

    pub fn to_iso(self) -> String {
        self.naive().format("%Y-%m-%dT%H:%MZ").to_string()
    }

    /// Compact form used in file names, e.g. `2020010100`.
    pub fn compact(self) -> String {
        self.naive().format("%Y%m%d%H").to_string()
    }

    pub fn parse_compact(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(&format!("{s}00"), "%Y%m%d%H%M")
            .map_err(|e| Error::InvalidArgument(format!("bad compact time '{s}': {e}")))?;
        Ok(Self::from_naive_rounded(dt))
    }

    pub fn month_key(self) -> String {
        self.naive().format("%Y-%m").to_string()
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

/// Serde adapter storing a [`TimeStamp`] as an ISO-8601 string.
pub mod iso {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::TimeStamp;

    pub fn serialize<S: Serializer>(t: &TimeStamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_iso())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TimeStamp, D::Error> {
        let s = String::deserialize(d)?;
        TimeStamp::parse_iso(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_rule() {
        let a = TimeStamp::parse_iso("2020-03-01T10:29").unwrap();
        let b = TimeStamp::parse_iso("2020-03-01T10:30").unwrap();
        let c = TimeStamp::parse_iso("2020-03-01T10:37:00Z").unwrap();
        assert_eq!(a.hour_of_day(), 10);
        assert_eq!(b.hour_of_day(), 11);
        assert_eq!(c.hour_of_day(), 11);
        let late = TimeStamp::parse_iso("2020-12-31T23:45").unwrap();
        assert_eq!(late.year(), 2021);
        assert_eq!(late.day_of_year(), 1);
        assert_eq!(late.hour_of_day(), 0);
    }

    #[test]
    fn calendar_fields() {
        let t = TimeStamp::from_ymdh(2020, 12, 31, 7).unwrap();
        assert_eq!(t.day_of_year(), 366);
        let t = TimeStamp::from_ymdh(2021, 12, 31, 7).unwrap();
        assert_eq!(t.day_of_year(), 365);
        assert_eq!(t.hour_of_day(), 7);
        assert_eq!(TimeStamp::parse_iso(&t.to_iso()).unwrap(), t);
        assert_eq!(TimeStamp::parse_compact(&t.compact()).unwrap(), t);
    }

    #[test]
    fn cycle_floor_is_six_hourly() {
        let t = TimeStamp::from_ymdh(2020, 1, 2, 3).unwrap();
        assert_eq!(t.cycle_floor(), TimeStamp::from_ymdh(2020, 1, 2, 0).unwrap());
        let t = TimeStamp::from_ymdh(2020, 1, 2, 23).unwrap();
        assert_eq!(t.cycle_floor().hour_of_day(), 18);
    }
}
