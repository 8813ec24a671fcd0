//! Trajectory and base-station ingestion.
//!
//! PLT layout: six header lines, then one fix per line as
//! `lat,lon,0,altitude_ft,days_since_1899,date,time`. Only latitude,
//! longitude and the date/time columns are kept.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_distance, GeoPoint, NormalizationBounds};

pub mod synthetic;

pub const PLT_HEADER_LINES: usize = 6;
pub const DEFAULT_SEQ_LEN: usize = 8;
pub const DEFAULT_MAX_SPEED_MPS: f64 = 50.0;

/// Half-width (degrees) of the band used when a coordinate never varies.
pub const CONSTANT_BOUNDS_PAD_DEG: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub position: GeoPoint,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: String,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn new(vehicle_id: impl Into<String>, records: Vec<TrajectoryRecord>) -> Self {
        Trajectory {
            vehicle_id: vehicle_id.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = GeoPoint> + '_ {
        self.records.iter().map(|r| r.position)
    }
}

/// One supervised example: `seq_len` normalised positions and the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub input: Vec<[f64; 2]>,
    pub target: [f64; 2],
    pub target_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub windows: Vec<Window>,
    /// Latitude and longitude bounds, in that order.
    pub bounds: [NormalizationBounds; 2],
    pub seq_len: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub position: GeoPoint,
    pub capacity_hz: f64,
    pub range_m: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StationSnapshot {
    pub stations: Vec<Station>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationDefaults {
    pub capacity_hz: f64,
    pub range_m: f64,
}

fn parse_timestamp(date: &str, time: &str) -> Option<f64> {
    let d = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d").ok()?;
    let t = NaiveTime::parse_from_str(time.trim(), "%H:%M:%S").ok()?;
    Some(NaiveDateTime::new(d, t).and_utc().timestamp() as f64)
}

/// Parses a Geolife PLT file. Records are returned in timestamp order.
pub fn parse_plt(vehicle_id: &str, content: &str) -> Result<Trajectory> {
    let mut records = Vec::new();
    for (idx, line) in content.lines().enumerate().skip(PLT_HEADER_LINES) {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let num = |i: usize, what: &str| -> Result<f64> {
            fields[i].trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad {what} `{}`", fields[i]),
            })
        };
        let lat = num(0, "latitude")?;
        let lon = num(1, "longitude")?;
        let position = GeoPoint::new(lat, lon).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let timestamp = parse_timestamp(fields[5], fields[6]).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("bad date/time `{},{}`", fields[5], fields[6]),
        })?;
        records.push(TrajectoryRecord {
            position,
            timestamp,
        });
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(Trajectory::new(vehicle_id, records))
}

/// Drops duplicate timestamps and fixes implying a speed above `max_speed`
/// (m/s) relative to the last kept fix.
pub fn clean(t: &Trajectory, max_speed: f64) -> Result<Trajectory> {
    let mut kept: Vec<TrajectoryRecord> = Vec::with_capacity(t.records.len());
    for rec in &t.records {
        match kept.last() {
            None => kept.push(*rec),
            Some(prev) => {
                let dt = rec.timestamp - prev.timestamp;
                if dt <= 0.0 {
                    continue;
                }
                let speed = haversine_distance(prev.position, rec.position) / dt;
                if speed <= max_speed {
                    kept.push(*rec);
                }
            }
        }
    }
    if kept.len() < 2 {
        return Err(Error::DegenerateTrajectory {
            remaining: kept.len(),
        });
    }
    Ok(Trajectory::new(t.vehicle_id.clone(), kept))
}

/// Stride-1 sliding windows of `seq_len` positions with the following
/// position as target, normalised per dimension over the whole trajectory.
pub fn build_windows(t: &Trajectory, seq_len: usize) -> Result<WindowedDataset> {
    let bounds = [
        NormalizationBounds::fit(t.positions().map(|p| p.lat_deg), CONSTANT_BOUNDS_PAD_DEG)?,
        NormalizationBounds::fit(t.positions().map(|p| p.lon_deg), CONSTANT_BOUNDS_PAD_DEG)?,
    ];
    build_windows_with_bounds(t, seq_len, bounds)
}

/// As [`build_windows`] but normalising with caller-supplied bounds.
pub fn build_windows_with_bounds(
    t: &Trajectory,
    seq_len: usize,
    bounds: [NormalizationBounds; 2],
) -> Result<WindowedDataset> {
    let n = t.records.len();
    if seq_len == 0 || n < seq_len + 1 {
        return Err(Error::TooFewRecords {
            needed: seq_len + 1,
            have: n,
        });
    }
    let norm: Vec<[f64; 2]> = t
        .positions()
        .map(|p| {
            [
                bounds[0].normalize(p.lat_deg),
                bounds[1].normalize(p.lon_deg),
            ]
        })
        .collect();
    let windows = (0..n - seq_len)
        .map(|s| Window {
            input: norm[s..s + seq_len].to_vec(),
            target: norm[s + seq_len],
            target_time: t.records[s + seq_len].timestamp,
        })
        .collect();
    Ok(WindowedDataset {
        windows,
        bounds,
        seq_len,
    })
}

/// Chronological split; the first `round(n * train_fraction)` windows train.
pub fn split(
    d: &WindowedDataset,
    train_fraction: f64,
) -> Result<(WindowedDataset, WindowedDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = d.windows.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "{n} windows at fraction {train_fraction} leaves an empty share"
        )));
    }
    let part = |w: &[Window]| WindowedDataset {
        windows: w.to_vec(),
        bounds: d.bounds,
        seq_len: d.seq_len,
    };
    Ok((part(&d.windows[..n_train]), part(&d.windows[n_train..])))
}

/// Parses a station CSV with required `lat`/`lon` columns and optional `id`,
/// `capacity_hz`, `range_m`.
pub fn parse_stations(content: &str, defaults: StationDefaults) -> Result<StationSnapshot> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Stations(e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let lat_col = col("lat").ok_or_else(|| Error::Stations("missing column `lat`".into()))?;
    let lon_col = col("lon").ok_or_else(|| Error::Stations("missing column `lon`".into()))?;
    let id_col = col("id");
    let cap_col = col("capacity_hz");
    let range_col = col("range_m");

    let mut stations: Vec<Station> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        // header is line 1
        let line = row + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let number = |c: usize, what: &str| -> Result<f64> {
            field(c).parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("bad {what} `{}`", field(c)),
            })
        };
        let position =
            GeoPoint::new(number(lat_col, "lat")?, number(lon_col, "lon")?).map_err(|e| {
                Error::Parse {
                    line,
                    msg: e.to_string(),
                }
            })?;
        let id = match id_col.map(field) {
            Some(s) if !s.is_empty() => s.to_string(),
            _ => format!("s{row}"),
        };
        let capacity_hz = match cap_col {
            Some(c) if !field(c).is_empty() => number(c, "capacity_hz")?,
            _ => defaults.capacity_hz,
        };
        let range_m = match range_col {
            Some(c) if !field(c).is_empty() => number(c, "range_m")?,
            _ => defaults.range_m,
        };
        if !(capacity_hz > 0.0) || !(range_m > 0.0) {
            return Err(Error::Parse {
                line,
                msg: "capacity and range must be positive".into(),
            });
        }
        if stations.iter().any(|s| s.id == id) {
            return Err(Error::Stations(format!("duplicate station id `{id}`")));
        }
        stations.push(Station {
            id,
            position,
            capacity_hz,
            range_m,
        });
    }
    Ok(StationSnapshot { stations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "Geolife trajectory\nWGS 84\nAltitude is in Feet\nReserved 3\n0,2,255,My Track,0,0,2,8421376\n0\n";

    fn rec(lat: f64, lon: f64, ts: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            position: GeoPoint::new(lat, lon).unwrap(),
            timestamp: ts,
        }
    }

    #[test]
    fn parses_plt_lines() {
        let content = format!(
            "{HEADER}39.984702,116.318417,0,492,39744.1201851852,2008-10-23,02:53:04\n\
             39.984683,116.31845,0,492,39744.1202546296,2008-10-23,02:53:10\n\
             39.984686,116.318417,0,492,39744.1203125,2008-10-23,02:53:15\n"
        );
        let t = parse_plt("u0", &content).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.records[0].position.lat_deg, 39.984702);
        assert_eq!(t.records[0].position.lon_deg, 116.318417);
        assert_eq!(t.records[1].timestamp - t.records[0].timestamp, 6.0);
    }

    #[test]
    fn plt_errors() {
        assert!(matches!(parse_plt("u", HEADER), Err(Error::NoRecords)));
        let bad = format!("{HEADER}39.9,116.3,0,492,39744.1,2008-10-23,02:53:04\n39.9,oops,0,1,1,2008-10-23,02:53:05\n");
        match parse_plt("u", &bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plt_sorts_by_timestamp() {
        let content = format!(
            "{HEADER}39.9,116.3,0,0,0,2008-10-23,02:53:10\n39.8,116.3,0,0,0,2008-10-23,02:53:04\n"
        );
        let t = parse_plt("u", &content).unwrap();
        assert_eq!(t.records[0].position.lat_deg, 39.8);
    }

    #[test]
    fn clean_examples() {
        let t = Trajectory::new(
            "v",
            vec![
                rec(40.0, 116.0, 0.0),
                rec(40.0001, 116.0, 1.0),
                rec(40.0002, 116.0, 2.0),
            ],
        );
        assert_eq!(clean(&t, 100.0).unwrap(), t);

        // 100 km spike between two close fixes
        let spike = Trajectory::new(
            "v",
            vec![
                rec(40.0, 116.0, 0.0),
                rec(40.9, 116.0, 1.0),
                rec(40.0001, 116.0, 2.0),
            ],
        );
        let c = clean(&spike, 100.0).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.records[1].timestamp, 2.0);

        let dup = Trajectory::new(
            "v",
            vec![
                rec(40.0, 116.0, 0.0),
                rec(40.0, 116.0, 0.0),
                rec(40.0, 116.0, 1.0),
            ],
        );
        assert_eq!(clean(&dup, 100.0).unwrap().len(), 2);

        let degenerate = Trajectory::new("v", vec![rec(40.0, 116.0, 0.0), rec(40.0, 116.0, 0.0)]);
        assert!(matches!(
            clean(&degenerate, 100.0),
            Err(Error::DegenerateTrajectory { .. })
        ));
    }

    fn line_track(n: usize) -> Trajectory {
        Trajectory::new(
            "v",
            (0..n)
                .map(|i| {
                    rec(
                        40.0 + i as f64 * 1e-4,
                        116.0 + (i as f64 * 0.3).sin() * 1e-4,
                        i as f64,
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn window_counts() {
        assert_eq!(build_windows(&line_track(7082), 8).unwrap().len(), 7074);
        assert_eq!(build_windows(&line_track(9), 8).unwrap().len(), 1);
        assert!(matches!(
            build_windows(&line_track(8), 8),
            Err(Error::TooFewRecords { .. })
        ));
    }

    #[test]
    fn windows_are_normalised_and_consecutive() {
        let d = build_windows(&line_track(30), 8).unwrap();
        for w in &d.windows {
            assert_eq!(w.input.len(), 8);
            for v in w.input.iter().chain(std::iter::once(&w.target)) {
                assert!((0.0..=1.0).contains(&v[0]) && (0.0..=1.0).contains(&v[1]));
            }
        }
        assert_eq!(d.windows[1].input[7], d.windows[0].target);
    }

    #[test]
    fn split_examples() {
        let d = build_windows(&line_track(108), 8).unwrap();
        let (a, b) = split(&d, 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));
        assert!(split(&d, 1.0).is_err());
        assert!(split(&d, 0.0).is_err());
        let d2 = build_windows(&line_track(10), 8).unwrap();
        let (a, b) = split(&d2, 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        let d1 = build_windows(&line_track(9), 8).unwrap();
        assert!(split(&d1, 0.5).is_err());
    }

    const DEFAULTS: StationDefaults = StationDefaults {
        capacity_hz: 1e10,
        range_m: 1000.0,
    };

    #[test]
    fn parses_stations() {
        let csv = "id,lat,lon,range_m\na,39.98,116.30,\nb,39.99,116.31,500\nc,39.97,116.32,\nd,39.96,116.33,\ne,39.95,116.34,\nf,39.94,116.35,\n";
        let s = parse_stations(csv, DEFAULTS).unwrap();
        assert_eq!(s.stations.len(), 6);
        assert_eq!(s.stations[0].range_m, 1000.0);
        assert_eq!(s.stations[1].range_m, 500.0);
        assert_eq!(s.stations[2].capacity_hz, 1e10);
    }

    #[test]
    fn station_errors() {
        assert!(parse_stations("id,lat,lon\na,1,2\na,3,4\n", DEFAULTS).is_err());
        assert!(parse_stations("id,lat,lon\na,91,2\n", DEFAULTS).is_err());
        assert!(parse_stations("id,latitude,lon\na,1,2\n", DEFAULTS).is_err());
        let no_id = parse_stations("lat,lon\n1,2\n3,4\n", DEFAULTS).unwrap();
        assert_eq!(no_id.stations[1].id, "s1");
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(steps in proptest::collection::vec((-5e-3..5e-3f64, -5e-3..5e-3f64, 0u8..3), 2..60)) {
            let mut recs = vec![rec(40.0, 116.0, 0.0)];
            for (dlat, dlon, dt) in steps {
                let last = *recs.last().unwrap();
                recs.push(rec(last.position.lat_deg + dlat, last.position.lon_deg + dlon, last.timestamp + dt as f64));
            }
            let t = Trajectory::new("p", recs);
            if let Ok(once) = clean(&t, 50.0) {
                let twice = clean(&once, 50.0).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn windows_count_and_split_chronology(n in 9usize..200, frac in 0.05..0.95f64) {
            let d = build_windows(&line_track(n), 8).unwrap();
            prop_assert_eq!(d.len(), n - 8);
            if let Ok((a, b)) = split(&d, frac) {
                let max_train = a.windows.iter().map(|w| w.target_time).fold(f64::MIN, f64::max);
                let min_test = b.windows.iter().map(|w| w.target_time).fold(f64::MAX, f64::min);
                prop_assert!(max_train < min_test);
            }
        }
    }
}
