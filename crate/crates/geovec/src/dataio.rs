//! CSV and raster loaders.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use chrono::DateTime;
use geovec_core::geo::{Coordinate, NodeSet};
use geovec_core::predict::AttributeVector;
use geovec_core::raster::{parse_ascii_grid, RasterError, RasterGrid};
use geovec_core::series::{SeriesError, TimeSeriesDataset};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {message}")]
    Range { line: usize, message: String },
    #[error("line {line}: timestamp is not after the previous row")]
    NonMonotonicTimestamps { line: usize },
    #[error("missing value at row {row}, column `{col}`")]
    MissingValue { row: usize, col: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, DataError> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(f))
}

/// 1-based file line of a record (header is line 1).
fn line_of(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map_or(fallback, |p| p.line() as usize)
}

fn csv_err(e: csv::Error, fallback: usize) -> DataError {
    let line = e.position().map_or(fallback, |p| p.line() as usize);
    DataError::Parse { line, message: e.to_string() }
}

fn expect_header(rdr: &mut csv::Reader<fs::File>, want: &[&str]) -> Result<(), DataError> {
    let h = rdr.headers().map_err(|e| csv_err(e, 1))?;
    let got: Vec<&str> = h.iter().collect();
    if got != want {
        return Err(DataError::Parse { line: 1, message: format!("expected header `{}`, got `{}`", want.join(","), got.join(",")) });
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64, DataError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DataError::Parse { line, message: format!("bad {what} `{s}`") })
}

/// Nodes from a CSV with header `id,lon,lat`.
pub fn load_nodes_csv(path: &Path) -> Result<NodeSet, DataError> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, &["id", "lon", "lat"])?;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, i + 2))?;
        let line = line_of(&rec, i + 2);
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(DataError::Parse { line, message: "empty id".into() });
        }
        let lon = parse_f64(&rec[1], line, "lon")?;
        let lat = parse_f64(&rec[2], line, "lat")?;
        let c = Coordinate::new(lon, lat).map_err(|e| DataError::Range { line, message: e.to_string() })?;
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId { line, id });
        }
        ids.push(id);
        coords.push(c);
    }
    NodeSet::new(ids, coords).map_err(|e| DataError::Parse { line: 1, message: e.to_string() })
}

/// Attribute values from a CSV with header `id,value`.
pub fn load_attribute_csv(path: &Path, name: &str) -> Result<AttributeVector, DataError> {
    let mut rdr = reader(path)?;
    expect_header(&mut rdr, &["id", "value"])?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, i + 2))?;
        let line = line_of(&rec, i + 2);
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(DataError::DuplicateId { line, id });
        }
        values.push(parse_f64(&rec[1], line, "value")?);
        ids.push(id);
    }
    AttributeVector::new(name.to_string(), ids, values).map_err(|e| DataError::Parse { line: 1, message: e.to_string() })
}

/// Series from a CSV with header `timestamp,<id1>,<id2>,...` and RFC 3339
/// timestamps.
pub fn load_timeseries_csv(path: &Path) -> Result<TimeSeriesDataset, DataError> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_err(e, 1))?.clone();
    if header.get(0) != Some("timestamp") || header.len() < 2 {
        return Err(DataError::Parse { line: 1, message: "expected header `timestamp,<id>,...`".into() });
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(DataError::DuplicateId { line: 1, id: dup.clone() });
    }
    let mut timestamps: Vec<i64> = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, row + 2))?;
        let line = line_of(&rec, row + 2);
        let ts = DateTime::parse_from_rfc3339(&rec[0])
            .map_err(|e| DataError::Parse { line, message: format!("bad timestamp `{}`: {e}", &rec[0]) })?
            .timestamp();
        if timestamps.last().is_some_and(|&prev| ts <= prev) {
            return Err(DataError::NonMonotonicTimestamps { line });
        }
        timestamps.push(ts);
        for (j, id) in ids.iter().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            if cell.is_empty() {
                return Err(DataError::MissingValue { row, col: id.clone() });
            }
            values.push(parse_f64(cell, line, "value")?);
        }
    }
    Ok(TimeSeriesDataset::new(ids, timestamps, values)?)
}

/// Writes `ds` in the format read by [`load_timeseries_csv`].
pub fn write_timeseries_csv(path: &Path, ds: &TimeSeriesDataset) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(ds.node_ids().iter().cloned());
    w.write_record(&header).map_err(|e| io_err(path, e))?;
    for t in 0..ds.len() {
        let ts = DateTime::from_timestamp(ds.timestamps()[t], 0).ok_or_else(|| io_err(path, "timestamp out of range"))?;
        let mut rec = vec![ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)];
        rec.extend(ds.row(t).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_nodes_csv(path: &Path, nodes: &NodeSet) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["id", "lon", "lat"]).map_err(|e| io_err(path, e))?;
    for (id, c) in nodes.iter() {
        w.write_record([id, &c.lon().to_string(), &c.lat().to_string()]).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_attribute_csv(path: &Path, attr: &AttributeVector) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["id", "value"]).map_err(|e| io_err(path, e))?;
    for (id, v) in attr.node_ids.iter().zip(&attr.values) {
        w.write_record([id, &v.to_string()]).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// An ESRI ASCII grid file.
pub fn load_raster(path: &Path) -> Result<RasterGrid, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(parse_ascii_grid(&text)?)
}
