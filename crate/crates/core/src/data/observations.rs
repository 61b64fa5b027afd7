//! Observation table: delimited text with a header row and columns
//! `platform_id, platform_type, iso_utc_time, lat, lon, u, v, qc_flag`.
//! `qc_flag` is 1 for accepted reports and 0 for rejected ones.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoBox, GeoCoord};
use crate::platform::PlatformType;
use crate::time::TimeStamp;
use crate::wind::WindVector;

pub const OBS_COLUMNS: [&str; 8] = ["platform_id", "platform_type", "iso_utc_time", "lat", "lon", "u", "v", "qc_flag"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub platform_id: String,
    pub platform_type: PlatformType,
    pub time: TimeStamp,
    pub coord: GeoCoord,
    pub wind: WindVector,
}

impl ObservationRecord {
    fn sort_key(&self) -> (TimeStamp, &str) {
        (self.time, &self.platform_id)
    }
}

/// Parsed records plus counts of everything that was set aside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedObservations {
    pub records: Vec<ObservationRecord>,
    pub out_of_domain: usize,
    pub qc_rejected: usize,
    pub duplicates: usize,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn parse_observations(path: &Path, domain: Option<&GeoBox>) -> Result<ParsedObservations> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_observations_str(&text, path, domain)
}

/// Sorts by `(time, platform_id)`, keeps the last row for a repeated
/// `(platform_id, time)` and drops rows outside `domain`.
pub fn parse_observations_str(text: &str, path: &Path, domain: Option<&GeoBox>) -> Result<ParsedObservations> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != OBS_COLUMNS {
        return Err(parse_err(
            path,
            1,
            format!("header {:?}, expected {:?}", cols, OBS_COLUMNS),
        ));
    }
    let mut out = ParsedObservations::default();
    let mut rows: Vec<(usize, ObservationRecord)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(path, line, e.to_string()))?;
        if rec.len() != 8 {
            return Err(parse_err(path, line, format!("{} fields, expected 8", rec.len())));
        }
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("{} '{}' is not a number", OBS_COLUMNS[k], &rec[k])))
        };
        let platform_id = rec[0].to_string();
        if platform_id.is_empty() {
            return Err(parse_err(path, line, "empty platform_id"));
        }
        let platform_type: PlatformType = rec[1].parse().map_err(|e: Error| parse_err(path, line, e.to_string()))?;
        let time = TimeStamp::parse_iso(&rec[2]).map_err(|e| parse_err(path, line, e.to_string()))?;
        let coord = GeoCoord::new(num(3)?, num(4)?).map_err(|e| parse_err(path, line, e.to_string()))?;
        let wind = WindVector::new(num(5)?, num(6)?).map_err(|e| parse_err(path, line, e.to_string()))?;
        let qc = match &rec[7] {
            "1" => true,
            "0" => false,
            other => return Err(parse_err(path, line, format!("qc_flag '{other}' must be 0 or 1"))),
        };
        if !qc {
            out.qc_rejected += 1;
            continue;
        }
        if let Some(b) = domain {
            if !b.contains(&coord) {
                out.out_of_domain += 1;
                continue;
            }
        }
        rows.push((
            line,
            ObservationRecord {
                platform_id,
                platform_type,
                time,
                coord,
                wind,
            },
        ));
    }
    // Stable sort keeps file order within a key, so the last row wins.
    rows.sort_by(|a, b| a.1.sort_key().cmp(&b.1.sort_key()));
    let before = rows.len();
    let mut records: Vec<ObservationRecord> = Vec::with_capacity(rows.len());
    for (_, r) in rows {
        match records.last_mut() {
            Some(prev) if prev.sort_key() == r.sort_key() => *prev = r,
            _ => records.push(r),
        }
    }
    out.duplicates = before - records.len();
    out.records = records;
    Ok(out)
}

pub fn write_observations_to(w: impl Write, records: &[ObservationRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::InvalidArgument(format!("writing observation table: {e}"));
    wtr.write_record(OBS_COLUMNS).map_err(io)?;
    for r in records {
        wtr.write_record([
            r.platform_id.clone(),
            r.platform_type.to_string(),
            r.time.to_iso(),
            r.coord.lat().to_string(),
            r.coord.lon().to_string(),
            r.wind.u.to_string(),
            r.wind.v.to_string(),
            "1".to_string(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub fn write_observations(path: &Path, records: &[ObservationRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_observations_to(std::io::BufWriter::new(f), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "platform_id,platform_type,iso_utc_time,lat,lon,u,v,qc_flag\n";

    fn parse(body: &str) -> Result<ParsedObservations> {
        parse_observations_str(&format!("{HEADER}{body}"), Path::new("t.csv"), None)
    }

    #[test]
    fn empty_table() {
        assert!(parse("").unwrap().records.is_empty());
    }

    #[test]
    fn minutes_round_to_nearest_hour() {
        let p = parse("A,ship,2020-01-01T10:37Z,1,2,3,4,1\nB,ship,2020-01-01T10:29Z,1,2,3,4,1\n").unwrap();
        let hours: Vec<u32> = p.records.iter().map(|r| r.time.hour_of_day()).collect();
        assert_eq!(hours, vec![10, 11]);
        assert_eq!(p.records[0].platform_id, "B");
    }

    #[test]
    fn last_duplicate_wins_and_sorting() {
        let p = parse(
            "B,ship,2020-01-01T10:00Z,1,2,3,4,1\nA,ship,2020-01-01T10:00Z,1,2,3,4,1\nB,ship,2020-01-01T10:10Z,1,2,9,9,1\n",
        )
        .unwrap();
        assert_eq!(p.duplicates, 1);
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[0].platform_id, "A");
        assert_eq!(p.records[1].wind, WindVector { u: 9.0, v: 9.0 });
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        match parse("A,ship,2020-01-01T10:00Z,1,2,3,4,1\nA,ship,2020-01-01T11:00Z,x,2,3,4,1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("A,zeppelin,2020-01-01T10:00Z,1,2,3,4,1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("A,ship,2020-01-01T10:00Z,1,2,3,4,7\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("A,ship,2020-01-01T10:00Z,1,2,300,4,1\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_observations_str("a,b\n", Path::new("x"), None),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn domain_and_qc_filters_are_counted() {
        let b = GeoBox {
            lat_min: 0.0,
            lat_max: 10.0,
            lon_min: 0.0,
            lon_max: 10.0,
        };
        let text = format!(
            "{HEADER}A,ship,2020-01-01T10:00Z,5,5,1,1,1\nB,ship,2020-01-01T10:00Z,50,5,1,1,1\nC,ship,2020-01-01T10:00Z,5,5,1,1,0\n"
        );
        let p = parse_observations_str(&text, Path::new("x"), Some(&b)).unwrap();
        assert_eq!((p.records.len(), p.out_of_domain, p.qc_rejected), (1, 1, 1));
    }

    #[test]
    fn every_platform_type_round_trips() {
        let records: Vec<ObservationRecord> = PlatformType::ALL[..6]
            .iter()
            .enumerate()
            .map(|(i, &p)| ObservationRecord {
                platform_id: format!("id{i}"),
                platform_type: p,
                time: TimeStamp::from_ymdh(2019, 7, 1, i as u32).unwrap(),
                coord: GeoCoord::new(10.125 + i as f64, -40.3 - 0.1 * i as f64).unwrap(),
                wind: WindVector {
                    u: 1.0 / 3.0 + i as f64,
                    v: -2.7,
                },
            })
            .chain(std::iter::once(ObservationRecord {
                platform_id: "fix".into(),
                platform_type: PlatformType::FixedPlatform,
                time: TimeStamp::from_ymdh(2019, 7, 1, 9).unwrap(),
                coord: GeoCoord::new(-3.0, 170.0).unwrap(),
                wind: WindVector { u: 0.1, v: 0.2 },
            }))
            .collect();
        let mut buf = Vec::new();
        write_observations_to(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = parse_observations_str(&text, Path::new("x"), None).unwrap();
        assert_eq!(back.records, records);
    }
}
