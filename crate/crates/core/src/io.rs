//! Plain-text formats: CSV for clouds, series, diagrams and grids, JSON for
//! reports and grid metadata, ASCII PGM for grid previews.
//!
//! Floats are written in `{:.16e}` so they read back bit-exactly; infinite
//! deaths are written as `inf`. Lines starting with `#` are ignored.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::filtration::Filtration;
use crate::geometry::{PointCloud, TimeSeries};
use crate::persistence::{PersistenceDiagram, PersistencePair};
use crate::summaries::{DensityGrid, GridSpec};
use crate::{Error, Result};

pub fn format_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

/// Rows of trimmed fields with their 1-based line numbers.
fn read_records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| parse_err(path, line, format!("not a number: {s:?}")))
}

fn parse_row(path: &Path, line: usize, fields: &[String]) -> Result<Vec<f64>> {
    fields.iter().map(|f| parse_f64(path, line, f)).collect()
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(",")
}

/// One point per line.
pub fn read_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let recs = read_records(path)?;
    let mut rows = Vec::with_capacity(recs.len());
    for (line, fields) in &recs {
        let row = parse_row(path, *line, fields)?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(parse_err(path, *line, format!("expected {first} columns, found {}", row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 0, "no points"));
    }
    PointCloud::new(rows)
}

pub fn write_point_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    write_lines(path.as_ref(), cloud.points().map(join))
}

/// All values in reading order, whether laid out as a column or a row.
pub fn read_time_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut values = Vec::new();
    for (line, fields) in read_records(path)? {
        values.extend(parse_row(path, line, &fields)?);
    }
    TimeSeries::new(values)
}

pub fn write_time_series(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    write_lines(path.as_ref(), series.values().iter().map(|v| format_float(*v)))
}

/// One series per line, integer class label first.
pub fn read_labelled_series(path: impl AsRef<Path>) -> Result<Vec<(TimeSeries, usize)>> {
    let path = path.as_ref();
    read_records(path)?
        .into_iter()
        .map(|(line, fields)| {
            let label = fields[0].parse::<usize>().map_err(|_| parse_err(path, line, format!("bad label {:?}", fields[0])))?;
            let values = parse_row(path, line, &fields[1..])?;
            let s = TimeSeries::new(values).map_err(|e| parse_err(path, line, e.to_string()))?;
            Ok((s, label))
        })
        .collect()
}

pub fn write_labelled_series(path: impl AsRef<Path>, data: &[(TimeSeries, usize)]) -> Result<()> {
    write_lines(path.as_ref(), data.iter().map(|(s, l)| format!("{l},{}", join(s.values()))))
}

/// `dim,birth,death` rows under a header; diagrams come back grouped by
/// dimension in ascending order.
pub fn read_diagrams(path: impl AsRef<Path>) -> Result<Vec<PersistenceDiagram>> {
    let path = path.as_ref();
    let mut by_dim: std::collections::BTreeMap<usize, Vec<PersistencePair>> = Default::default();
    for (k, (line, fields)) in read_records(path)?.into_iter().enumerate() {
        if k == 0 && fields.first().is_some_and(|f| f == "dim") {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 columns, found {}", fields.len())));
        }
        let dim = fields[0].parse::<usize>().map_err(|_| parse_err(path, line, format!("bad dimension {:?}", fields[0])))?;
        let birth = parse_f64(path, line, &fields[1])?;
        let death = parse_f64(path, line, &fields[2])?;
        if !birth.is_finite() || death < birth {
            return Err(parse_err(path, line, format!("invalid pair ({birth}, {death})")));
        }
        by_dim.entry(dim).or_default().push(PersistencePair::new(birth, death));
    }
    Ok(by_dim.into_iter().map(|(d, p)| PersistenceDiagram::new(d, p)).collect())
}

pub fn write_diagrams(path: impl AsRef<Path>, diagrams: &[PersistenceDiagram]) -> Result<()> {
    let rows = diagrams.iter().flat_map(|d| {
        d.pairs.iter().map(move |p| format!("{},{},{}", d.dim, format_float(p.birth), format_float(p.death)))
    });
    write_lines(path.as_ref(), std::iter::once("dim,birth,death".to_string()).chain(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GridMeta {
    spec: GridSpec,
    normalized: bool,
}

/// Path of the JSON file holding a grid's extent and resolution.
pub fn grid_sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// `ny` rows of `nx` values, lowest y first, plus the JSON sidecar.
pub fn write_grid(path: impl AsRef<Path>, grid: &DensityGrid) -> Result<()> {
    let path = path.as_ref();
    let nx = grid.spec.nx;
    write_lines(path, grid.values.chunks(nx).map(join))?;
    write_json(grid_sidecar(path), &GridMeta { spec: grid.spec, normalized: grid.normalized })
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<DensityGrid> {
    let path = path.as_ref();
    let meta: GridMeta = read_json(grid_sidecar(path))?;
    let mut values = Vec::with_capacity(meta.spec.cells());
    for (line, fields) in read_records(path)? {
        if fields.len() != meta.spec.nx {
            return Err(parse_err(path, line, format!("expected {} columns, found {}", meta.spec.nx, fields.len())));
        }
        values.extend(parse_row(path, line, &fields)?);
    }
    let mut g = DensityGrid::from_values(meta.spec, values)?;
    g.normalized = meta.normalized;
    Ok(g)
}

/// 8-bit ASCII greymap scaled to the grid maximum, highest y on top.
pub fn write_pgm(path: impl AsRef<Path>, grid: &DensityGrid) -> Result<()> {
    let (nx, ny) = (grid.spec.nx, grid.spec.ny);
    let max = grid.values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let header = [format!("P2\n{nx} {ny}\n255")];
    let rows = (0..ny).rev().map(|j| {
        (0..nx)
            .map(|i| ((grid.get(i, j) * scale).round() as u8).to_string())
            .collect::<Vec<_>>()
            .join(" ")
    });
    write_lines(path.as_ref(), header.into_iter().chain(rows))
}

/// `dim,value,vertices` with vertices separated by spaces, in filtration order.
pub fn write_filtration(path: impl AsRef<Path>, filt: &Filtration) -> Result<()> {
    let rows = filt.simplices().iter().map(|s| {
        let verts: Vec<String> = s.simplex.vertices().iter().map(usize::to_string).collect();
        format!("{},{},{}", s.simplex.dim(), format_float(s.value), verts.join(" "))
    });
    write_lines(path.as_ref(), std::iter::once("dim,value,vertices".to_string()).chain(rows))
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
