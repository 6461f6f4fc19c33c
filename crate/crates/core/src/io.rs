//! File formats: trajectory JSONL, POI and extract CSV, TSV report tables.
//!
//! Angles are degrees in every file and radians in memory. Writers sort
//! records by `(flight_id, point_index)` so output bytes never depend on
//! processing order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AdfError, Result};
use crate::eval::MatchReport;
use crate::extract::FieldTrace;
use crate::geo::{EnuCoord, GeodeticCoord};
use crate::trajectory::{PoiRecord, Trajectory, TrajectorySample};

/// One JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRow {
    pub flight_id: String,
    pub t: f64,
    pub lon: f64,
    pub lat: f64,
    pub alt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ve: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vn: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vu: Option<f64>,
}

/// A flight dropped during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedFlight {
    pub flight_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ingested {
    /// Valid flights sorted by id.
    pub trajectories: Vec<Trajectory>,
    pub skipped: Vec<SkippedFlight>,
    pub rows: usize,
}

fn row_to_sample(row: &TrajectoryRow, line: usize) -> Result<TrajectorySample> {
    let vel_enu = match (row.ve, row.vn, row.vu) {
        (Some(e), Some(n), Some(u)) => Some(EnuCoord::new(e, n, u)),
        (None, None, None) => None,
        _ => {
            return Err(AdfError::Parse {
                line,
                msg: "ve, vn and vu must be given together".into(),
            })
        }
    };
    Ok(TrajectorySample {
        t: row.t,
        geo: GeodeticCoord::from_degrees(row.lat, row.lon, row.alt),
        vel_enu,
    })
}

/// Reads trajectory JSONL. Malformed lines are errors; flights that parse
/// but fail validation (non-finite values, non-increasing time) are skipped
/// and listed in [`Ingested::skipped`]. Blank lines are ignored.
pub fn read_trajectories<R: Read>(reader: R) -> Result<Ingested> {
    let mut flights: BTreeMap<String, Vec<TrajectorySample>> = BTreeMap::new();
    let mut rows = 0;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TrajectoryRow = serde_json::from_str(&line).map_err(|e| AdfError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let s = row_to_sample(&row, line_no)?;
        flights.entry(row.flight_id).or_default().push(s);
        rows += 1;
    }
    if rows == 0 {
        return Err(AdfError::EmptyInput);
    }
    let mut out = Ingested {
        rows,
        ..Default::default()
    };
    for (id, samples) in flights {
        match Trajectory::new(id.clone(), samples) {
            Ok(t) => out.trajectories.push(t),
            Err(e) => out.skipped.push(SkippedFlight {
                flight_id: id,
                reason: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn load_trajectories(path: &Path) -> Result<Ingested> {
    read_trajectories(File::open(path)?)
}

pub fn trajectory_rows(traj: &Trajectory) -> impl Iterator<Item = TrajectoryRow> + '_ {
    traj.samples.iter().map(|s| TrajectoryRow {
        flight_id: traj.flight_id.clone(),
        t: s.t,
        lon: s.geo.lon_deg(),
        lat: s.geo.lat_deg(),
        alt: s.geo.height_m,
        ve: s.vel_enu.map(|v| v.east_m),
        vn: s.vel_enu.map(|v| v.north_m),
        vu: s.vel_enu.map(|v| v.up_m),
    })
}

/// Writes flights in id order, samples in time order.
pub fn write_trajectories<W: Write>(w: W, trajs: &[Trajectory]) -> Result<()> {
    let mut w = BufWriter::new(w);
    let mut order: Vec<&Trajectory> = trajs.iter().collect();
    order.sort_by(|a, b| a.flight_id.cmp(&b.flight_id));
    for t in order {
        for row in trajectory_rows(t) {
            serde_json::to_writer(&mut w, &row).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    write_trajectories(File::create(path)?, trajs)
}

pub const POI_HEADER: [&str; 6] = ["flight_id", "point_index", "lon_deg", "lat_deg", "alt_m", "score"];
pub const EXTRACT_HEADER: [&str; 7] = [
    "flight_id",
    "point_index",
    "lon_deg",
    "lat_deg",
    "alt_m",
    "adf_value",
    "is_poi",
];

pub fn sort_pois(pois: &mut [PoiRecord]) {
    pois.sort_by(|a, b| a.flight_id.cmp(&b.flight_id).then(a.point_index.cmp(&b.point_index)));
}

pub fn write_pois<W: Write>(w: W, pois: &[PoiRecord]) -> Result<()> {
    let mut sorted = pois.to_vec();
    sort_pois(&mut sorted);
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(POI_HEADER)?;
    for p in &sorted {
        wr.write_record([
            p.flight_id.clone(),
            p.point_index.to_string(),
            p.lon_deg.to_string(),
            p.lat_deg.to_string(),
            p.alt_m.to_string(),
            p.score.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn save_pois(path: &Path, pois: &[PoiRecord]) -> Result<()> {
    write_pois(File::create(path)?, pois)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, col: usize, name: &str, line: usize) -> Result<T> {
    rec[col].trim().parse().map_err(|_| AdfError::Parse {
        line,
        msg: format!("bad {name}: {:?}", &rec[col]),
    })
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(r)
}

fn map_csv_err(e: csv::Error) -> AdfError {
    if let csv::ErrorKind::UnequalLengths { pos, expected_len, len } = e.kind() {
        return AdfError::Parse {
            line: pos.as_ref().map_or(0, |p| p.line() as usize),
            msg: format!("expected {expected_len} columns, found {len}"),
        };
    }
    AdfError::Csv(e)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let h = rdr.headers().map_err(map_csv_err)?;
    if h.iter().ne(expected.iter().copied()) {
        return Err(AdfError::Parse {
            line: 1,
            msg: format!("expected header {}", expected.join(",")),
        });
    }
    Ok(())
}

fn poi_from_record(rec: &csv::StringRecord) -> Result<PoiRecord> {
    let line = record_line(rec);
    let p = PoiRecord {
        flight_id: rec[0].to_string(),
        point_index: parse_field(rec, 1, "point_index", line)?,
        lon_deg: parse_field(rec, 2, "lon_deg", line)?,
        lat_deg: parse_field(rec, 3, "lat_deg", line)?,
        alt_m: parse_field(rec, 4, "alt_m", line)?,
        score: parse_field(rec, 5, "score", line)?,
    };
    if !(0.0..=1.0).contains(&p.score) {
        return Err(AdfError::Parse {
            line,
            msg: format!("score {} outside [0, 1]", p.score),
        });
    }
    if !(p.lon_deg.is_finite() && p.lat_deg.is_finite() && p.alt_m.is_finite()) {
        return Err(AdfError::Parse {
            line,
            msg: "non-finite coordinate".into(),
        });
    }
    Ok(p)
}

pub fn read_pois<R: Read>(r: R) -> Result<Vec<PoiRecord>> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &POI_HEADER)?;
    rdr.records()
        .map(|rec| poi_from_record(&rec.map_err(map_csv_err)?))
        .collect()
}

pub fn load_pois(path: &Path) -> Result<Vec<PoiRecord>> {
    read_pois(File::open(path)?)
}

/// One row of an extract CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractRow {
    pub flight_id: String,
    pub point_index: usize,
    pub lon_deg: f64,
    pub lat_deg: f64,
    pub alt_m: f64,
    pub adf_value: f64,
    pub is_poi: bool,
}

impl ExtractRow {
    pub fn geodetic(&self) -> GeodeticCoord {
        GeodeticCoord::from_degrees(self.lat_deg, self.lon_deg, self.alt_m)
    }
}

pub fn extract_rows(traces: &[FieldTrace]) -> Vec<ExtractRow> {
    let mut rows: Vec<ExtractRow> = traces
        .iter()
        .flat_map(|tr| {
            tr.samples.iter().zip(&tr.poi_mask).enumerate().map(|(i, (s, &m))| ExtractRow {
                flight_id: tr.flight_id.clone(),
                point_index: i,
                lon_deg: s.geo.lon_deg(),
                lat_deg: s.geo.lat_deg(),
                alt_m: s.geo.height_m,
                adf_value: s.f.0,
                is_poi: m,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.flight_id.cmp(&b.flight_id).then(a.point_index.cmp(&b.point_index)));
    rows
}

pub fn write_extract<W: Write>(w: W, rows: &[ExtractRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(EXTRACT_HEADER)?;
    for r in rows {
        wr.write_record([
            r.flight_id.clone(),
            r.point_index.to_string(),
            r.lon_deg.to_string(),
            r.lat_deg.to_string(),
            r.alt_m.to_string(),
            fmt_value(r.adf_value),
            u8::from(r.is_poi).to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_extract<R: Read>(r: R) -> Result<Vec<ExtractRow>> {
    let mut rdr = csv_reader(r);
    check_header(&mut rdr, &EXTRACT_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(map_csv_err)?;
        let line = record_line(&rec);
        let is_poi = match rec[6].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(AdfError::Parse {
                    line,
                    msg: format!("bad is_poi: {other:?}"),
                })
            }
        };
        out.push(ExtractRow {
            flight_id: rec[0].to_string(),
            point_index: parse_field(&rec, 1, "point_index", line)?,
            lon_deg: parse_field(&rec, 2, "lon_deg", line)?,
            lat_deg: parse_field(&rec, 3, "lat_deg", line)?,
            alt_m: parse_field(&rec, 4, "alt_m", line)?,
            adf_value: parse_field(&rec, 5, "adf_value", line)?,
            is_poi,
        });
    }
    Ok(out)
}

/// Geodetic positions of flagged points from either a POI CSV (every row)
/// or an extract CSV (rows with `is_poi`), chosen by header.
pub fn load_point_set(path: &Path) -> Result<Vec<GeodeticCoord>> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or_default();
    if first.split(',').count() == EXTRACT_HEADER.len() {
        Ok(read_extract(text.as_bytes())?
            .into_iter()
            .filter(|r| r.is_poi)
            .map(|r| r.geodetic())
            .collect())
    } else {
        Ok(read_pois(text.as_bytes())?.iter().map(PoiRecord::geodetic).collect())
    }
}

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
fn fmt_value(v: f64) -> String {
    if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub const FIELD_HEADER: [&str; 7] = ["flight_id", "point_index", "lon_deg", "lat_deg", "alt_m", "score", "adf_value"];

/// POI rows with their field values, sorted by `(flight_id, point_index)`.
pub fn write_field_values<W: Write>(w: W, pois: &[PoiRecord], values: &[f64]) -> Result<()> {
    if pois.len() != values.len() {
        return Err(AdfError::InvalidParam(format!("{} rows but {} values", pois.len(), values.len())));
    }
    let mut order: Vec<usize> = (0..pois.len()).collect();
    order.sort_by(|&a, &b| {
        (pois[a].flight_id.as_str(), pois[a].point_index).cmp(&(pois[b].flight_id.as_str(), pois[b].point_index))
    });
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(FIELD_HEADER)?;
    for i in order {
        let p = &pois[i];
        wr.write_record([
            p.flight_id.clone(),
            p.point_index.to_string(),
            p.lon_deg.to_string(),
            p.lat_deg.to_string(),
            p.alt_m.to_string(),
            p.score.to_string(),
            fmt_value(values[i]),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub const MATCH_TSV_HEADER: &str = "threshold_m\tmatched\tunique_a\tunique_b\tprecision\trecall\tf1";

/// Generic tab-separated table.
pub fn write_tsv<W: Write>(mut w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    writeln!(w, "{}", header.join("\t"))?;
    for r in rows {
        writeln!(w, "{}", r.join("\t"))?;
    }
    Ok(())
}

/// One line per threshold; ratios as percentages with two decimals.
pub fn write_match_tsv<W: Write>(mut w: W, reports: &[MatchReport]) -> Result<()> {
    writeln!(w, "{MATCH_TSV_HEADER}")?;
    for r in reports {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_FLIGHTS: &str = r#"{"flight_id":"B","t":0,"lon":104.0,"lat":30.5,"alt":1000}
{"flight_id":"A","t":0,"lon":103.9,"lat":30.6,"alt":900,"ve":10,"vn":0,"vu":0}
{"flight_id":"A","t":1,"lon":103.9001,"lat":30.6,"alt":900,"ve":10,"vn":0,"vu":0}

{"flight_id":"B","t":1,"lon":104.0,"lat":30.5001,"alt":1000}
"#;

    #[test]
    fn two_flights_parse_sorted() {
        let ing = read_trajectories(TWO_FLIGHTS.as_bytes()).unwrap();
        assert_eq!(ing.rows, 4);
        assert!(ing.skipped.is_empty());
        let ids: Vec<_> = ing.trajectories.iter().map(|t| t.flight_id.as_str()).collect();
        assert_eq!(ids, ["A", "B"]);
        assert_eq!(ing.trajectories[0].samples[1].vel_enu, Some(EnuCoord::new(10.0, 0.0, 0.0)));
        assert_eq!(ing.trajectories[1].samples[0].vel_enu, None);
        assert!((ing.trajectories[1].samples[1].geo.lat_deg() - 30.5001).abs() < 1e-12);
    }

    #[test]
    fn decreasing_time_flight_is_skipped() {
        let text = r#"{"flight_id":"ok","t":0,"lon":1,"lat":1,"alt":0}
{"flight_id":"bad","t":5,"lon":1,"lat":1,"alt":0}
{"flight_id":"ok","t":1,"lon":1,"lat":1,"alt":0}
{"flight_id":"bad","t":4,"lon":1,"lat":1,"alt":0}
"#;
        let ing = read_trajectories(text.as_bytes()).unwrap();
        assert_eq!(ing.trajectories.len(), 1);
        assert_eq!(ing.skipped.len(), 1);
        assert_eq!(ing.skipped[0].flight_id, "bad");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "{\"flight_id\":\"a\",\"t\":0,\"lon\":1,\"lat\":1,\"alt\":0}\n\n{\"flight_id\":\"a\",\"t\":1}\n";
        match read_trajectories(text.as_bytes()) {
            Err(AdfError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let partial = "{\"flight_id\":\"a\",\"t\":0,\"lon\":1,\"lat\":1,\"alt\":0,\"ve\":1}\n";
        assert!(matches!(read_trajectories(partial.as_bytes()), Err(AdfError::Parse { line: 1, .. })));
        assert!(matches!(read_trajectories("\n\n".as_bytes()), Err(AdfError::EmptyInput)));
    }

    #[test]
    fn jsonl_round_trip() {
        let ing = read_trajectories(TWO_FLIGHTS.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &ing.trajectories).unwrap();
        let again = read_trajectories(buf.as_slice()).unwrap();
        assert_eq!(again.trajectories.len(), 2);
        for (a, b) in ing.trajectories.iter().zip(&again.trajectories) {
            assert_eq!(a.flight_id, b.flight_id);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert_eq!(x.t, y.t);
                assert_eq!(x.geo.height_m, y.geo.height_m);
                assert_eq!(x.vel_enu, y.vel_enu);
                assert!((x.geo.lat_rad - y.geo.lat_rad).abs() <= 1e-15);
                assert!((x.geo.lon_rad - y.geo.lon_rad).abs() <= 1e-15);
            }
        }
    }

    fn poi(id: &str, i: usize, s: f64) -> PoiRecord {
        PoiRecord {
            flight_id: id.into(),
            point_index: i,
            lon_deg: 103.95,
            lat_deg: 30.57,
            alt_m: 1200.5,
            score: s,
        }
    }

    #[test]
    fn poi_csv_round_trip_sorted() {
        let pois = vec![poi("b", 3, 0.8), poi("a,x", 9, 1.0), poi("a,x", 2, 0.75)];
        let mut buf = Vec::new();
        write_pois(&mut buf, &pois).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("flight_id,point_index,lon_deg,lat_deg,alt_m,score\n\"a,x\",2,"));
        let back = read_pois(buf.as_slice()).unwrap();
        assert_eq!(back, vec![poi("a,x", 2, 0.75), poi("a,x", 9, 1.0), poi("b", 3, 0.8)]);
    }

    #[test]
    fn poi_csv_rejects_bad_rows() {
        let short = "flight_id,point_index,lon_deg,lat_deg,alt_m,score\na,1,2,3,4\n";
        assert!(matches!(read_pois(short.as_bytes()), Err(AdfError::Parse { line: 2, .. })));
        let range = "flight_id,point_index,lon_deg,lat_deg,alt_m,score\na,1,2,3,4,1.5\n";
        assert!(read_pois(range.as_bytes()).is_err());
        let header = "id,point_index,lon_deg,lat_deg,alt_m,score\n";
        assert!(read_pois(header.as_bytes()).is_err());
        let num = "flight_id,point_index,lon_deg,lat_deg,alt_m,score\na,x,2,3,4,0.5\n";
        assert!(matches!(read_pois(num.as_bytes()), Err(AdfError::Parse { line: 2, .. })));
    }

    #[test]
    fn values_round_trip_at_any_magnitude() {
        for v in [0.0, 1.4093666077943178e-106, 5e-5, 0.123456789, 24.757154745935598, 3.2e20, f64::MIN_POSITIVE] {
            let s = fmt_value(v);
            assert!(s.len() < 30, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_value(0.5), "0.5");
        assert_eq!(fmt_value(1e-106), "1e-106");
    }

    #[test]
    fn extract_csv_round_trip() {
        let rows = vec![ExtractRow {
            flight_id: "f".into(),
            point_index: 0,
            lon_deg: 1.0,
            lat_deg: 2.0,
            alt_m: 3.0,
            adf_value: 0.123456789,
            is_poi: true,
        }];
        let mut buf = Vec::new();
        write_extract(&mut buf, &rows).unwrap();
        assert_eq!(read_extract(buf.as_slice()).unwrap(), rows);
        let bad = "flight_id,point_index,lon_deg,lat_deg,alt_m,adf_value,is_poi\nf,0,1,2,3,4,5,6\n";
        assert!(read_extract(bad.as_bytes()).is_err());
    }

    #[test]
    fn field_values_sorted() {
        let mut buf = Vec::new();
        write_field_values(&mut buf, &[poi("b", 0, 1.0), poi("a", 1, 0.8)], &[2.0, 0.5]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "flight_id,point_index,lon_deg,lat_deg,alt_m,score,adf_value");
        assert!(lines[1].starts_with("a,1,") && lines[1].ends_with(",0.8,0.5"));
        assert!(lines[2].starts_with("b,0,") && lines[2].ends_with(",1,2"));
        assert!(write_field_values(Vec::new(), &[poi("a", 0, 1.0)], &[]).is_err());
    }

    #[test]
    fn match_tsv_layout() {
        let mut buf = Vec::new();
        write_match_tsv(&mut buf, &[MatchReport::from_counts(16606, 10758, 4163, 150.0)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "threshold_m\tmatched\tunique_a\tunique_b\tprecision\trecall\tf1\n150\t16606\t10758\t4163\t79.96\t60.69\t69.00\n"
        );
    }
}
