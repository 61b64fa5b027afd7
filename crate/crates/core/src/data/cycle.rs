//! Forecast-cycle selection for lead-time stitching.

use crate::error::{Error, Result};
use crate::time::TimeStamp;

/// Longest supported lead time in hours.
pub const MAX_LEAD_HOURS: u32 = 48;

/// Leads reported in metric tables.
pub const TABLE_LEADS: [u32; 9] = [1, 2, 4, 8, 12, 18, 24, 36, 48];

/// Latest cycle initialised at or before `t`, and the forecast hour that
/// is valid at `t` from it (0..=5).
pub fn latest_cycle(t: TimeStamp) -> (TimeStamp, u32) {
    let init = t.cycle_floor();
    (init, t.hours_since(init) as u32)
}

/// Cycle whose forecast is used to predict `target_time` at `lead_hours`:
/// the latest cycle available at the issue time `target_time − lead`.
/// Returns the cycle's init time and the forecast hour valid at the target.
pub fn gfs_cycle_select(target_time: TimeStamp, lead_hours: u32) -> Result<(TimeStamp, u32)> {
    if lead_hours == 0 || lead_hours > MAX_LEAD_HOURS {
        return Err(Error::InvalidArgument(format!(
            "lead {lead_hours} h outside [1, {MAX_LEAD_HOURS}]"
        )));
    }
    let issue = target_time.add_hours(-i64::from(lead_hours));
    let init = issue.cycle_floor();
    Ok((init, target_time.hours_since(init) as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(d: u32, h: u32) -> TimeStamp {
        TimeStamp::from_ymdh(2021, 7, d, h).unwrap()
    }

    #[test]
    fn worked_examples() {
        assert_eq!(gfs_cycle_select(at(2, 3), 3).unwrap(), (at(2, 0), 3));
        assert_eq!(gfs_cycle_select(at(2, 3), 4).unwrap(), (at(1, 18), 9));
        assert_eq!(gfs_cycle_select(at(2, 6), 6).unwrap(), (at(2, 0), 6));
        assert!(gfs_cycle_select(at(2, 6), 0).is_err());
        assert!(gfs_cycle_select(at(2, 6), 49).is_err());
    }

    #[test]
    fn latest_cycle_hours() {
        assert_eq!(latest_cycle(at(2, 0)), (at(2, 0), 0));
        assert_eq!(latest_cycle(at(2, 11)), (at(2, 6), 5));
    }
}
