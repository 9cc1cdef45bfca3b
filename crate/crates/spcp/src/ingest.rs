//! CSV ingestion, holdout splitting, and response centering for external
//! spatial datasets.

use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kriging::SpatialDataset;
use crate::Point;

/// How to find a column in a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnSel {
    Index(usize),
    Name(String),
}

/// Which columns carry the coordinates and the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub x: ColumnSel,
    pub y: ColumnSel,
    pub response: ColumnSel,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        ColumnSpec {
            x: ColumnSel::Name("s_x".into()),
            y: ColumnSel::Name("s_y".into()),
            response: ColumnSel::Name("y".into()),
        }
    }
}

/// Affine map applied per axis when rescaling to the unit square; kept so
/// coordinates can be mapped back exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleMap {
    pub x_offset: f64,
    pub x_scale: f64,
    pub y_offset: f64,
    pub y_scale: f64,
}

impl RescaleMap {
    pub fn apply(&self, p: &Point) -> Point {
        Point::new((p.x - self.x_offset) / self.x_scale, (p.y - self.y_offset) / self.y_scale)
    }

    pub fn invert(&self, p: &Point) -> Point {
        Point::new(p.x * self.x_scale + self.x_offset, p.y * self.y_scale + self.y_offset)
    }
}

/// What happened during ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    pub rows_rejected: usize,
    /// (1-based data row, reason) for each rejected row.
    pub reject_reasons: Vec<(usize, String)>,
    /// [xmin, xmax, ymin, ymax] of accepted rows.
    pub bounding_box: [f64; 4],
    pub response_mean: f64,
    pub response_min: f64,
    pub response_max: f64,
    /// Offset subtracted by [`center_responses`], when applied.
    pub centering_offset: Option<f64>,
    /// Populated when coordinates were rescaled to the unit square. Note
    /// that bandwidths are always interpreted in post-rescale units.
    pub rescale: Option<RescaleMap>,
}

fn resolve(sel: &ColumnSel, headers: &csv::StringRecord) -> Result<usize> {
    match sel {
        ColumnSel::Index(i) => {
            if *i < headers.len() {
                Ok(*i)
            } else {
                Err(Error::Dataset(format!(
                    "column index {i} out of range ({} columns)",
                    headers.len()
                )))
            }
        }
        ColumnSel::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Dataset(format!("missing column {name:?}"))),
    }
}

/// Load a dataset from CSV. Rows with unparsable or non-finite fields are
/// rejected with a per-row reason; zero accepted rows is an error.
pub fn load_csv(path: &Path, columns: &ColumnSpec) -> Result<(SpatialDataset, IngestReport)> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let (cx, cy, cr) = (
        resolve(&columns.x, &headers)?,
        resolve(&columns.y, &headers)?,
        resolve(&columns.response, &headers)?,
    );
    let mut locations = Vec::new();
    let mut responses = Vec::new();
    let mut rows_read = 0usize;
    let mut reject_reasons = Vec::new();
    for (k, record) in reader.records().enumerate() {
        rows_read += 1;
        let record = record?;
        let parse = |col: usize, what: &str| -> std::result::Result<f64, String> {
            let raw = record
                .get(col)
                .ok_or_else(|| format!("row too short for {what}"))?;
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| format!("{what} {raw:?} is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{what} {raw:?} is not finite"))
            }
        };
        match (parse(cx, "x"), parse(cy, "y"), parse(cr, "response")) {
            (Ok(x), Ok(y), Ok(r)) => {
                locations.push(Point::new(x, y));
                responses.push(r);
            }
            (a, b, c) => {
                let reason = [a.err(), b.err(), c.err()]
                    .into_iter()
                    .flatten()
                    .collect::<Vec<_>>()
                    .join("; ");
                reject_reasons.push((k + 1, reason));
            }
        }
    }
    if locations.is_empty() {
        return Err(Error::Dataset(format!(
            "no usable rows in {} ({} rejected)",
            path.display(),
            reject_reasons.len()
        )));
    }
    let bounding_box = [
        locations.iter().map(|p| p.x).fold(f64::INFINITY, f64::min),
        locations.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max),
        locations.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
        locations.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
    ];
    let report = IngestReport {
        rows_read,
        rows_accepted: locations.len(),
        rows_rejected: reject_reasons.len(),
        reject_reasons,
        bounding_box,
        response_mean: responses.iter().sum::<f64>() / responses.len() as f64,
        response_min: responses.iter().cloned().fold(f64::INFINITY, f64::min),
        response_max: responses.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        centering_offset: None,
        rescale: None,
    };
    Ok((SpatialDataset::new(locations, responses)?, report))
}

/// Write a dataset as CSV with columns (s_x, s_y, y). Uses the shortest
/// round-trippable float formatting, so ingest-then-export is lossless.
pub fn write_csv(path: &Path, data: &SpatialDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["s_x", "s_y", "y"])?;
    for (p, y) in data.locations().iter().zip(data.responses()) {
        w.write_record([
            format!("{}", p.x),
            format!("{}", p.y),
            format!("{y}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write an ingest report as pretty JSON next to a dataset.
pub fn write_report(path: &Path, report: &IngestReport) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(report)?.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Rescale coordinates to the unit square (opt-in), recording the affine
/// map. Bandwidths passed to the local methods afterwards are in the
/// rescaled units.
pub fn rescale_to_unit_square(data: &SpatialDataset) -> Result<(SpatialDataset, RescaleMap)> {
    let xs: Vec<f64> = data.locations().iter().map(|p| p.x).collect();
    let ys: Vec<f64> = data.locations().iter().map(|p| p.y).collect();
    let (xmin, xmax) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (ymin, ymax) = (ys.iter().cloned().fold(f64::INFINITY, f64::min), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let map = RescaleMap {
        x_offset: xmin,
        x_scale: if xmax > xmin { xmax - xmin } else { 1.0 },
        y_offset: ymin,
        y_scale: if ymax > ymin { ymax - ymin } else { 1.0 },
    };
    let locations: Vec<Point> = data.locations().iter().map(|p| map.apply(p)).collect();
    Ok((
        SpatialDataset::new(locations, data.responses().to_vec())?,
        map,
    ))
}

/// Subtract the sample mean from the responses, returning the offset so
/// predictions can be mapped back.
pub fn center_responses(data: &mut SpatialDataset) -> f64 {
    let offset = data.mean_response();
    data.shift_responses(offset);
    offset
}

/// Disjoint (train, validation, test) index sets, uniform without
/// replacement, deterministic in the seed.
pub fn split_holdout(
    data: &SpatialDataset,
    n_validation: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let n = data.len();
    if n_validation + n_test > n {
        return Err(Error::InvalidParam(format!(
            "validation {n_validation} + test {n_test} exceeds {n} observations"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let validation: Vec<usize> = idx[..n_validation].to_vec();
    let test: Vec<usize> = idx[n_validation..n_validation + n_test].to_vec();
    let mut train: Vec<usize> = idx[n_validation + n_test..].to_vec();
    train.sort_unstable();
    Ok((train, validation, test))
}
