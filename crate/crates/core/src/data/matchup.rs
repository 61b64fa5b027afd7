//! Colocation of observations with stitched forecasts and reanalysis.
//!
//! The matchup store holds one delimited file per calendar month,
//! `matchups_YYYY-MM.csv`, with a header row and these columns:
//!
//! | column | meaning |
//! |---|---|
//! | `platform_id`, `platform_type`, `iso_utc_time`, `lat`, `lon`, `u`, `v` | the observation |
//! | `issue_u`, `issue_v` | forecast valid at the observation time from the latest cycle at or before it |
//! | `era5_u`, `era5_v` | reanalysis at the observation time |
//! | `nwp_u_LL`, `nwp_v_LL` for `LL` = 01..48 | forecast valid at the observation time from the cycle selected for lead `LL` |
//!
//! Empty cells mark values whose field was missing. Files are only ever
//! appended to; a header is written when a file is created.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::cycle::{gfs_cycle_select, latest_cycle, MAX_LEAD_HOURS};
use super::grid::nearest_grid_sample;
use super::observations::ObservationRecord;
use super::store::{FieldKey, FieldStore};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::geo::GeoCoord;
use crate::platform::PlatformType;
use crate::time::TimeStamp;
use crate::wind::WindVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchupRecord {
    pub observation: ObservationRecord,
    /// Index `ℓ − 1` holds the forecast for lead `ℓ`; `None` when missing.
    pub nwp_per_lead: Vec<Option<WindVector>>,
    /// Forecast from the latest cycle at or before the observation time.
    pub nwp_issue: Option<WindVector>,
    pub reanalysis: Option<WindVector>,
}

impl MatchupRecord {
    pub fn nwp_at_lead(&self, lead: u32) -> Option<WindVector> {
        self.nwp_per_lead.get(lead.checked_sub(1)? as usize).copied().flatten()
    }

    pub fn missing_leads(&self) -> Vec<u32> {
        (1..=MAX_LEAD_HOURS).filter(|&l| self.nwp_at_lead(l).is_none()).collect()
    }
}

/// Fields a record needs: slot 0 is the issue forecast, slots 1..=48 the
/// per-lead forecasts and slot 49 the reanalysis.
fn required_keys(t: TimeStamp) -> Vec<FieldKey> {
    let mut keys = Vec::with_capacity(MAX_LEAD_HOURS as usize + 2);
    let (init, forecast_hour) = latest_cycle(t);
    keys.push(FieldKey::Forecast { init, forecast_hour });
    for lead in 1..=MAX_LEAD_HOURS {
        let (init, forecast_hour) = gfs_cycle_select(t, lead).expect("lead in range");
        keys.push(FieldKey::Forecast { init, forecast_hour });
    }
    keys.push(FieldKey::Reanalysis { valid: t });
    keys
}

/// Samples every forecast and reanalysis value for each record. Each field
/// is loaded once; missing fields leave the affected slots empty.
pub fn build_matchups(
    records: &[ObservationRecord],
    gfs: &dyn FieldStore,
    era5: &dyn FieldStore,
    mode: ExecMode,
) -> Result<Vec<MatchupRecord>> {
    const SLOTS: usize = MAX_LEAD_HOURS as usize + 2;
    let mut requests: BTreeMap<FieldKey, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        for (slot, key) in required_keys(r.time).into_iter().enumerate() {
            requests.entry(key).or_default().push((i, slot));
        }
    }
    let groups: Vec<(FieldKey, Vec<(usize, usize)>)> = requests.into_iter().collect();
    let sampled = exec::try_map(mode, &groups, |(key, reqs)| -> Result<Vec<(usize, usize, WindVector)>> {
        let store = match key {
            FieldKey::Forecast { .. } => gfs,
            FieldKey::Reanalysis { .. } => era5,
        };
        let Some(field) = store.load(key)? else {
            return Ok(Vec::new());
        };
        reqs.iter()
            .map(|&(i, slot)| Ok((i, slot, nearest_grid_sample(&field, &records[i].coord)?)))
            .collect()
    })?;
    let mut slots = vec![[None::<WindVector>; SLOTS]; records.len()];
    for (i, slot, w) in sampled.into_iter().flatten() {
        slots[i][slot] = Some(w);
    }
    Ok(records
        .iter()
        .zip(slots)
        .map(|(r, s)| MatchupRecord {
            observation: r.clone(),
            nwp_issue: s[0],
            nwp_per_lead: s[1..=MAX_LEAD_HOURS as usize].to_vec(),
            reanalysis: s[SLOTS - 1],
        })
        .collect())
}

pub fn matchup_columns() -> Vec<String> {
    let mut c: Vec<String> = [
        "platform_id",
        "platform_type",
        "iso_utc_time",
        "lat",
        "lon",
        "u",
        "v",
        "issue_u",
        "issue_v",
        "era5_u",
        "era5_v",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for l in 1..=MAX_LEAD_HOURS {
        c.push(format!("nwp_u_{l:02}"));
        c.push(format!("nwp_v_{l:02}"));
    }
    c
}

fn push_opt(row: &mut Vec<String>, w: Option<WindVector>) {
    match w {
        Some(w) => {
            row.push(w.u.to_string());
            row.push(w.v.to_string());
        }
        None => {
            row.push(String::new());
            row.push(String::new());
        }
    }
}

fn to_row(m: &MatchupRecord) -> Vec<String> {
    let o = &m.observation;
    let mut row = vec![
        o.platform_id.clone(),
        o.platform_type.to_string(),
        o.time.to_iso(),
        o.coord.lat().to_string(),
        o.coord.lon().to_string(),
        o.wind.u.to_string(),
        o.wind.v.to_string(),
    ];
    push_opt(&mut row, m.nwp_issue);
    push_opt(&mut row, m.reanalysis);
    for w in &m.nwp_per_lead {
        push_opt(&mut row, *w);
    }
    row
}

pub fn month_file(dir: &Path, month_key: &str) -> PathBuf {
    dir.join(format!("matchups_{month_key}.csv"))
}

/// Appends records to the per-month files under `dir`.
pub fn append_matchups(dir: &Path, records: &[MatchupRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut by_month: BTreeMap<String, Vec<&MatchupRecord>> = BTreeMap::new();
    for r in records {
        by_month.entry(r.observation.time.month_key()).or_default().push(r);
    }
    for (month, recs) in by_month {
        let path = month_file(dir, &month);
        let fresh = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let mut wtr = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let err = |e: csv::Error| Error::InvalidArgument(format!("writing {}: {e}", path.display()));
        if fresh {
            wtr.write_record(matchup_columns()).map_err(err)?;
        }
        for r in recs {
            wtr.write_record(to_row(r)).map_err(err)?;
        }
        let mut inner = wtr.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        inner.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn parse_row(rec: &csv::StringRecord, path: &Path, line: usize) -> Result<MatchupRecord> {
    let perr = |m: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: m,
    };
    let num = |k: usize| -> Result<f64> { rec[k].parse::<f64>().map_err(|_| perr(format!("column {k}: '{}'", &rec[k]))) };
    let opt = |k: usize| -> Result<Option<WindVector>> {
        match (rec[k].is_empty(), rec[k + 1].is_empty()) {
            (true, true) => Ok(None),
            (false, false) => Ok(Some(WindVector { u: num(k)?, v: num(k + 1)? })),
            _ => Err(perr(format!("half-missing wind pair at column {k}"))),
        }
    };
    let platform_type: PlatformType = rec[1].parse().map_err(|e: Error| perr(e.to_string()))?;
    let observation = ObservationRecord {
        platform_id: rec[0].to_string(),
        platform_type,
        time: TimeStamp::parse_iso(&rec[2]).map_err(|e| perr(e.to_string()))?,
        coord: GeoCoord::new(num(3)?, num(4)?).map_err(|e| perr(e.to_string()))?,
        wind: WindVector { u: num(5)?, v: num(6)? },
    };
    let nwp_issue = opt(7)?;
    let reanalysis = opt(9)?;
    let nwp_per_lead = (0..MAX_LEAD_HOURS as usize).map(|l| opt(11 + 2 * l)).collect::<Result<_>>()?;
    Ok(MatchupRecord {
        observation,
        nwp_per_lead,
        nwp_issue,
        reanalysis,
    })
}

pub fn read_matchup_file(path: &Path) -> Result<Vec<MatchupRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != matchup_columns() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "unexpected matchup header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push(parse_row(&rec, path, i + 2)?);
    }
    Ok(out)
}

/// Every month file in `dir`, concatenated and sorted by
/// `(time, platform_id)`.
pub fn read_matchups(dir: &Path) -> Result<Vec<MatchupRecord>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("matchups_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(read_matchup_file(&f)?);
    }
    out.sort_by(|a, b| {
        (a.observation.time, &a.observation.platform_id).cmp(&(b.observation.time, &b.observation.platform_id))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::grid::{GridField, GridSpec};
    use crate::data::store::MemoryStore;

    fn spec() -> GridSpec {
        GridSpec::new(0.0, 4.0, 10.0, 14.0, 1.0).unwrap()
    }

    /// Field whose value encodes its key, so every sampled value can be
    /// traced back to the field it came from.
    fn tagged(init: TimeStamp, fh: u32) -> GridField {
        let n = spec().n_nodes();
        let u = (0..n).map(|k| k as f64 + 0.25).collect();
        let v = vec![fh as f64 + (init.hours() % 1000) as f64 / 1000.0; n];
        GridField::new(spec(), init, init.add_hours(i64::from(fh)), u, v).unwrap()
    }

    fn record(t: TimeStamp) -> ObservationRecord {
        ObservationRecord {
            platform_id: "P1".into(),
            platform_type: PlatformType::Ship,
            time: t,
            coord: GeoCoord::new(2.2, 12.6).unwrap(),
            wind: WindVector { u: 1.0, v: 2.0 },
        }
    }

    fn full_store(first_init: TimeStamp, cycles: i64) -> MemoryStore {
        let mut s = MemoryStore::new();
        for c in 0..cycles {
            let init = first_init.add_hours(6 * c);
            for fh in 0..=53 {
                s.insert(FieldKey::Forecast { init, forecast_hour: fh }, tagged(init, fh));
            }
        }
        s
    }

    #[test]
    fn complete_store_fills_every_lead() {
        let t = TimeStamp::from_ymdh(2021, 3, 3, 3).unwrap();
        let gfs = full_store(t.add_hours(-60).cycle_floor(), 12);
        let mut era5 = MemoryStore::new();
        era5.insert(FieldKey::Reanalysis { valid: t }, tagged(t, 0));
        let m = build_matchups(&[record(t)], &gfs, &era5, ExecMode::Sequential).unwrap();
        assert!(m[0].missing_leads().is_empty());
        assert!(m[0].reanalysis.is_some());
        for lead in 1..=48 {
            let (init, fh) = gfs_cycle_select(t, lead).unwrap();
            let expect = nearest_grid_sample(&tagged(init, fh), &record(t).coord).unwrap();
            assert_eq!(m[0].nwp_at_lead(lead), Some(expect));
        }
        assert_eq!(m[0].nwp_issue.unwrap().v, 3.0 + (t.cycle_floor().hours() % 1000) as f64 / 1000.0);
    }

    #[test]
    fn missing_cycle_only_affects_its_leads() {
        let t = TimeStamp::from_ymdh(2021, 3, 3, 3).unwrap();
        let mut gfs = full_store(t.add_hours(-60).cycle_floor(), 12);
        let gone = TimeStamp::from_ymdh(2021, 3, 2, 18).unwrap();
        for fh in 0..=53 {
            gfs.remove(&FieldKey::Forecast { init: gone, forecast_hour: fh });
        }
        let m = build_matchups(&[record(t)], &gfs, &MemoryStore::new(), ExecMode::Sequential).unwrap();
        assert_eq!(m[0].missing_leads(), vec![4, 5, 6, 7, 8, 9]);
        assert!(m[0].reanalysis.is_none());
    }

    #[test]
    fn store_round_trip_and_append() {
        let t = TimeStamp::from_ymdh(2021, 3, 31, 23).unwrap();
        let gfs = full_store(t.add_hours(-60).cycle_floor(), 12);
        let recs = [record(t), record(t.add_hours(2))];
        let mut m = build_matchups(&recs, &gfs, &MemoryStore::new(), ExecMode::Parallel).unwrap();
        m[1].nwp_per_lead[7] = None;
        let dir = tempfile::tempdir().unwrap();
        append_matchups(dir.path(), &m[..1]).unwrap();
        append_matchups(dir.path(), &m[1..]).unwrap();
        assert!(month_file(dir.path(), "2021-03").exists());
        assert!(month_file(dir.path(), "2021-04").exists());
        assert_eq!(read_matchups(dir.path()).unwrap(), m);
    }
}
