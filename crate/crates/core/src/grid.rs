//! Regular grids, hourly fields and random placement of square areas.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2};
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Informational only.
    #[serde(default = "default_cell_size")]
    pub cell_size_km: f64,
}

fn default_cell_size() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new(n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidInput(format!(
                "grid must have at least one row and column, got {n_rows}x{n_cols}"
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            cell_size_km: 1.0,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows * self.n_cols
    }
}

/// One hourly precipitation field (mm per grid box).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Array2<f64>,
    pub timestamp: i64,
    pub lead_time_h: u32,
}

impl GridField {
    /// Validates that every value is finite and non-negative.
    pub fn new(spec: GridSpec, values: Array2<f64>, timestamp: i64, lead_time_h: u32) -> Result<Self> {
        if values.dim() != (spec.n_rows, spec.n_cols) {
            return Err(Error::InvalidInput(format!(
                "field shape {:?} does not match spec {}x{}",
                values.dim(),
                spec.n_rows,
                spec.n_cols
            )));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!("invalid value {v} at row {r}, col {c}")));
        }
        Ok(Self {
            spec,
            values,
            timestamp,
            lead_time_h,
        })
    }

    pub fn zeros(spec: GridSpec, timestamp: i64) -> Self {
        Self {
            spec,
            values: Array2::zeros((spec.n_rows, spec.n_cols)),
            timestamp,
            lead_time_h: 0,
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    /// The `side`×`side` block under `area`.
    pub fn slice(&self, area: &Area) -> ArrayView2<'_, f64> {
        self.values
            .slice(s![area.row0..area.row0 + area.side, area.col0..area.col0 + area.side])
    }

    /// Row-major flattening of the block under `area`.
    pub fn area_vector(&self, area: &Area) -> Vec<f64> {
        self.slice(area).iter().copied().collect()
    }
}

/// Square evaluation area given by its top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Area {
    pub row0: usize,
    pub col0: usize,
    pub side: usize,
}

impl Area {
    pub fn m(&self) -> usize {
        self.side * self.side
    }

    pub fn overlaps(&self, other: &Area) -> bool {
        let rows = self.row0 < other.row0 + other.side && other.row0 < self.row0 + self.side;
        let cols = self.col0 < other.col0 + other.side && other.col0 < self.col0 + self.side;
        rows && cols
    }

    pub fn fits(&self, spec: &GridSpec) -> bool {
        self.row0 + self.side <= spec.n_rows && self.col0 + self.side <= spec.n_cols
    }
}

/// Places non-overlapping areas uniformly at random until `max_failures`
/// consecutive proposals are rejected.
pub fn sample_areas<R: Rng + ?Sized>(
    spec: &GridSpec,
    side: usize,
    rng: &mut R,
    max_failures: usize,
) -> Result<Vec<Area>> {
    if side == 0 || side > spec.n_rows || side > spec.n_cols {
        return Err(Error::EmptyDomain(format!(
            "a {side}x{side} area does not fit in a {}x{} window",
            spec.n_rows, spec.n_cols
        )));
    }
    if max_failures == 0 {
        return Err(Error::InvalidInput("max_failures must be at least 1".into()));
    }
    let row_span = spec.n_rows - side + 1;
    let col_span = spec.n_cols - side + 1;
    let mut areas: Vec<Area> = Vec::new();
    let mut failures = 0;
    while failures < max_failures {
        let cand = Area {
            row0: rng.random_range(0..row_span),
            col0: rng.random_range(0..col_span),
            side,
        };
        if areas.iter().any(|a| a.overlaps(&cand)) {
            failures += 1;
        } else {
            areas.push(cand);
            failures = 0;
        }
    }
    Ok(areas)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    #[default]
    Bin,
    Csv,
}

impl FromStr for FieldFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bin" | "binary" => Ok(FieldFormat::Bin),
            "csv" => Ok(FieldFormat::Csv),
            other => Err(Error::Config(format!("unknown field format '{other}' (expected csv or bin)"))),
        }
    }
}

impl FieldFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            FieldFormat::Bin => "bin",
            FieldFormat::Csv => "csv",
        }
    }
}

/// "VNSFLD64" as little-endian bytes.
const FIELD_MAGIC: i64 = i64::from_le_bytes(*b"VNSFLD64");
const FIELD_VERSION: i64 = 1;
const CSV_TAG: &str = "# vineshuffle-field";

pub fn write_field(field: &GridField, path: &Path, format: FieldFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let spec = field.spec;
    match format {
        FieldFormat::Bin => {
            let header = [
                FIELD_MAGIC,
                FIELD_VERSION,
                spec.n_rows as i64,
                spec.n_cols as i64,
                field.timestamp,
                i64::from(field.lead_time_h),
                0,
                0,
            ];
            for h in header {
                w.write_all(&h.to_le_bytes()).map_err(io)?;
            }
            for v in field.values.iter() {
                w.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        FieldFormat::Csv => {
            writeln!(
                w,
                "{CSV_TAG} n_rows={} n_cols={} timestamp={} lead_time_h={}",
                spec.n_rows, spec.n_cols, field.timestamp, field.lead_time_h
            )
            .map_err(io)?;
            for row in field.values.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                writeln!(w, "{}", line.join(",")).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn read_field(path: &Path, format: FieldFormat) -> Result<GridField> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        FieldFormat::Bin => read_bin(path, BufReader::new(file)),
        FieldFormat::Csv => read_csv(path, BufReader::new(file)),
    }
}

fn check_value(path: &Path, v: f64, r: usize, c: usize) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::format(path.display(), format!("non-finite value at row {r}, col {c}")));
    }
    if v < 0.0 {
        return Err(Error::format(path.display(), format!("negative value {v} at row {r}, col {c}")));
    }
    Ok(v)
}

fn read_bin<R: Read>(path: &Path, mut r: R) -> Result<GridField> {
    let disp = &path.display().to_string();
    let mut header = [0i64; 8];
    let mut buf = [0u8; 8];
    for h in header.iter_mut() {
        r.read_exact(&mut buf)
            .map_err(|_| Error::format(disp, "truncated header"))?;
        *h = i64::from_le_bytes(buf);
    }
    if header[0] != FIELD_MAGIC {
        return Err(Error::format(disp, "bad magic number"));
    }
    if header[1] != FIELD_VERSION {
        return Err(Error::format(disp, format!("unsupported version {}", header[1])));
    }
    let (n_rows, n_cols) = (header[2], header[3]);
    if n_rows <= 0 || n_cols <= 0 {
        return Err(Error::format(disp, format!("invalid shape {n_rows}x{n_cols}")));
    }
    let lead = u32::try_from(header[5]).map_err(|_| Error::format(disp, "invalid lead time"))?;
    let spec = GridSpec::new(n_rows as usize, n_cols as usize)?;
    let mut values = Array2::zeros((spec.n_rows, spec.n_cols));
    for ((i, j), slot) in values.indexed_iter_mut() {
        r.read_exact(&mut buf).map_err(|_| {
            Error::format(disp, format!("shape mismatch: data ends before row {i}, col {j}"))
        })?;
        *slot = check_value(path, f64::from_le_bytes(buf), i, j)?;
    }
    if r.read(&mut buf).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(disp, "shape mismatch: trailing data after last row"));
    }
    Ok(GridField {
        spec,
        values,
        timestamp: header[4],
        lead_time_h: lead,
    })
}

fn read_csv<R: BufRead>(path: &Path, r: R) -> Result<GridField> {
    let disp = &path.display().to_string();
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(disp, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let rest = header
        .strip_prefix(CSV_TAG)
        .ok_or_else(|| Error::format(disp, "missing field header line"))?;
    let mut meta = std::collections::HashMap::new();
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::format(disp, format!("malformed header entry '{kv}'")))?;
        let v: i64 = v
            .parse()
            .map_err(|_| Error::format(disp, format!("malformed header value '{kv}'")))?;
        meta.insert(k.to_string(), v);
    }
    let get = |k: &str| {
        meta.get(k)
            .copied()
            .ok_or_else(|| Error::format(disp, format!("header lacks '{k}'")))
    };
    let (n_rows, n_cols) = (get("n_rows")?, get("n_cols")?);
    if n_rows <= 0 || n_cols <= 0 {
        return Err(Error::format(disp, format!("invalid shape {n_rows}x{n_cols}")));
    }
    let spec = GridSpec::new(n_rows as usize, n_cols as usize)?;
    let lead = u32::try_from(get("lead_time_h")?).map_err(|_| Error::format(disp, "invalid lead time"))?;
    let mut values = Array2::zeros((spec.n_rows, spec.n_cols));
    let mut n_read = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if i >= spec.n_rows {
            return Err(Error::format(disp, format!("row count exceeds n_rows={} at row {i}", spec.n_rows)));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != spec.n_cols {
            return Err(Error::format(
                disp,
                format!("row {i} has {} columns, expected {}", cells.len(), spec.n_cols),
            ));
        }
        for (j, cell) in cells.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::format(disp, format!("unparsable value '{cell}' at row {i}, col {j}")))?;
            values[[i, j]] = check_value(path, v, i, j)?;
        }
        n_read += 1;
    }
    if n_read != spec.n_rows {
        return Err(Error::format(disp, format!("found {n_read} rows, expected n_rows={}", spec.n_rows)));
    }
    Ok(GridField {
        spec,
        values,
        timestamp: get("timestamp")?,
        lead_time_h: lead,
    })
}
