use std::f64::consts::TAU;

use crate::time::TimeStamp;

/// `[sin(2πd/366), cos(2πd/366), sin(2πh/24), cos(2πh/24)]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeFeatures(pub [f64; 4]);

/// The annual denominator is 366 for every year, leap or not.
pub fn encode_time(ts: TimeStamp) -> TimeFeatures {
    let d = ts.day_of_year() as f64;
    let h = ts.hour_of_day() as f64;
    let (sa, ca) = (TAU * d / 366.0).sin_cos();
    let (sd, cd) = (TAU * h / 24.0).sin_cos();
    TimeFeatures([sa, ca, sd, cd])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(year: i32, doy: u32, hour: u32) -> TimeStamp {
        TimeStamp::from_ymdh(year, 1, 1, hour).unwrap().add_hours(24 * (doy as i64 - 1))
    }

    #[test]
    fn full_period() {
        let f = encode_time(at(2020, 366, 0)).0;
        assert!(f[0].abs() < 1e-12);
        assert!((f[1] - 1.0).abs() < 1e-12);
        assert_eq!(f[2], 0.0);
        assert_eq!(f[3], 1.0);
    }

    #[test]
    fn half_and_quarter_period() {
        let f = encode_time(at(2021, 183, 6)).0;
        assert!(f[0].abs() < 1e-12);
        assert!((f[1] + 1.0).abs() < 1e-12);
        assert!((f[2] - 1.0).abs() < 1e-12);
        assert!(f[3].abs() < 1e-12);
    }

    #[test]
    fn frozen_reference_day45_hour13() {
        // Independent double-precision evaluation of the four formulas.
        let expected = [
            0.6979441547663435,
            0.7161521883143933,
            -0.2588190451025208,
            -0.9659258262890683,
        ];
        let f = encode_time(at(2019, 45, 13)).0;
        for (a, b) in f.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn unit_circle_pairs() {
        let start = TimeStamp::from_ymdh(2015, 4, 1, 0).unwrap();
        for k in (0..24 * 800).step_by(7) {
            let f = encode_time(start.add_hours(k)).0;
            assert!((f[0] * f[0] + f[1] * f[1] - 1.0).abs() < 1e-9);
            assert!((f[2] * f[2] + f[3] * f[3] - 1.0).abs() < 1e-9);
            assert!(f.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
