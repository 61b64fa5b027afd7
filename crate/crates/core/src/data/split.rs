//! Chronological train/validation/test partition.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::Sample;
use crate::time::TimeStamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSplit {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    /// First issue time of the validation and test parts.
    pub boundaries: (TimeStamp, TimeStamp),
    /// Samples whose target time reaches into the following part, as
    /// `(part, index within part)`.
    pub flagged: Vec<(SplitPart, usize)>,
}

/// Boundaries are the issue times of the samples at positions
/// ⌊0.8·N⌋ and ⌊0.9·N⌋ in issue-time order. A sample belongs to the part
/// containing its issue time; one whose target time falls in a later part
/// stays where it is and is flagged.
pub fn temporal_split(mut samples: Vec<Sample>) -> Result<TemporalSplit> {
    samples.sort_by_key(|s| (s.issue_time, s.lead_hours));
    let distinct: BTreeSet<TimeStamp> = samples.iter().map(|s| s.issue_time).collect();
    if distinct.len() < 10 {
        return Err(Error::Split(format!(
            "{} distinct issue times, at least 10 are needed",
            distinct.len()
        )));
    }
    let n = samples.len();
    let b1 = samples[n * 8 / 10].issue_time;
    let b2 = samples[n * 9 / 10].issue_time;
    if b1 == b2 {
        return Err(Error::Split(
            "validation range is empty; issue times are too concentrated".into(),
        ));
    }
    let first = samples[0].issue_time;
    if b1 == first {
        return Err(Error::Split("training range is empty".into()));
    }
    let mut out = TemporalSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        boundaries: (b1, b2),
        flagged: Vec::new(),
    };
    for s in samples {
        let target = s.issue_time.add_hours(i64::from(s.lead_hours));
        let (part, limit) = if s.issue_time < b1 {
            (SplitPart::Train, Some(b1))
        } else if s.issue_time < b2 {
            (SplitPart::Val, Some(b2))
        } else {
            (SplitPart::Test, None)
        };
        let dest = match part {
            SplitPart::Train => &mut out.train,
            SplitPart::Val => &mut out.val,
            SplitPart::Test => &mut out.test,
        };
        if limit.is_some_and(|b| target >= b) {
            out.flagged.push((part, dest.len()));
        }
        dest.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(h: i64, lead: u32) -> Sample {
        Sample {
            issue_time: TimeStamp::from_hours(h),
            lead_hours: lead,
            obs: vec![],
            targets: vec![],
            truth: None,
        }
    }

    #[test]
    fn eighty_ten_ten() {
        let sp = temporal_split((0..100).map(|h| s(h * 3, 1)).collect()).unwrap();
        assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), (80, 10, 10));
        assert_eq!(sp.boundaries, (TimeStamp::from_hours(240), TimeStamp::from_hours(270)));
        assert!(sp.flagged.is_empty());
    }

    #[test]
    fn spill_over_is_flagged() {
        let sp = temporal_split((0..100).map(|h| s(h, 2)).collect()).unwrap();
        assert_eq!(sp.flagged, vec![(SplitPart::Train, 78), (SplitPart::Train, 79), (SplitPart::Val, 8), (SplitPart::Val, 9)]);
    }

    #[test]
    fn degenerate_input() {
        assert!(matches!(temporal_split(vec![s(5, 1); 50]), Err(Error::Split(_))));
        assert!(temporal_split((0..9).map(|h| s(h, 1)).collect()).is_err());
    }
}
