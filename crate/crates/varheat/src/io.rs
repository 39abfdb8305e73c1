//! File formats: path CSV/JSON, field snapshots, variation rows and JSON helpers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use varheat_core::path::{Path, PathKind};
use varheat_core::spde::Snapshot;
use varheat_core::variations::VariationResult;

use crate::error::{AppError, AppResult};

/// Number of `#` lines in front of the column header of a path CSV.
pub const PATH_HEADER_LINES: usize = 8;

/// Metadata stored with a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub kind: PathKind,
    pub grid_n: usize,
    pub spatial_point: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Generating parameters, free-form JSON.
    pub params: serde_json::Value,
}

impl PathMeta {
    pub fn of(path: &Path, seed: u64, params: serde_json::Value) -> Self {
        Self {
            kind: path.kind,
            grid_n: path.grid_n(),
            spatial_point: path.spatial_point,
            t_start: path.t_start,
            t_end: path.t_end,
            seed,
            params,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PathJson {
    #[serde(flatten)]
    meta: PathMeta,
    values: Vec<f64>,
}

fn create(path: &FsPath) -> AppResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::io(path, e))
}

fn open(path: &FsPath) -> AppResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| AppError::io(path, e))
}

/// Writes `# key=value` header lines, the `i,t_i,value` header and one row per
/// grid point. Floats use the shortest representation that parses back to
/// the same bits.
pub fn write_path_csv(file: &FsPath, path: &Path, meta: &PathMeta) -> AppResult<()> {
    let io = |e| AppError::io(file, e);
    let mut w = create(file)?;
    let header = [
        "# varheat path".to_string(),
        format!("# kind={}", meta.kind.as_str()),
        format!("# grid_n={}", meta.grid_n),
        format!("# spatial_point={}", meta.spatial_point),
        format!("# t_start={}", meta.t_start),
        format!("# t_end={}", meta.t_end),
        format!("# seed={}", meta.seed),
        format!("# params={}", meta.params),
    ];
    debug_assert_eq!(header.len(), PATH_HEADER_LINES);
    for line in &header {
        writeln!(w, "{line}").map_err(io)?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(["i", "t_i", "value"])
        .map_err(|e| AppError::format(file, e.to_string()))?;
    for (i, v) in path.values().iter().enumerate() {
        csv.write_record([i.to_string(), path.time(i).to_string(), v.to_string()])
            .map_err(|e| AppError::format(file, e.to_string()))?;
    }
    csv.flush().map_err(io)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(file: &FsPath, key: &str, v: Option<&String>) -> AppResult<T> {
    v.ok_or_else(|| AppError::format(file, format!("missing header field {key}")))?
        .parse()
        .map_err(|_| AppError::format(file, format!("bad value for header field {key}")))
}

pub fn read_path_csv(file: &FsPath) -> AppResult<(Path, PathMeta)> {
    let mut r = open(file)?;
    let mut fields = std::collections::HashMap::new();
    for _ in 0..PATH_HEADER_LINES {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| AppError::io(file, e))?;
        let line = line.trim_end();
        let Some(body) = line.strip_prefix('#') else {
            return Err(AppError::format(file, "expected an 8-line '#' header"));
        };
        if let Some((k, v)) = body.trim_start().split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    let kind_s: String = parse_field(file, "kind", fields.get("kind"))?;
    let kind = PathKind::parse(&kind_s)
        .ok_or_else(|| AppError::format(file, format!("unknown path kind {kind_s}")))?;
    let grid_n: usize = parse_field(file, "grid_n", fields.get("grid_n"))?;
    let spatial_point: f64 = parse_field(file, "spatial_point", fields.get("spatial_point"))?;
    let t_start: f64 = parse_field(file, "t_start", fields.get("t_start"))?;
    let t_end: f64 = parse_field(file, "t_end", fields.get("t_end"))?;
    let seed: u64 = parse_field(file, "seed", fields.get("seed"))?;
    let params: serde_json::Value = fields
        .get("params")
        .map(|s| serde_json::from_str(s))
        .transpose()
        .map_err(|e| AppError::format(file, format!("params: {e}")))?
        .unwrap_or(serde_json::Value::Null);

    let mut csv = csv::Reader::from_reader(r);
    let mut values = Vec::with_capacity(grid_n + 1);
    for (row, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| AppError::format(file, e.to_string()))?;
        let i: usize = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| AppError::format(file, format!("row {row}: bad index")))?;
        if i != row {
            return Err(AppError::format(file, format!("row {row}: index {i} out of order")));
        }
        let v: f64 = rec
            .get(2)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| AppError::format(file, format!("row {row}: bad value")))?;
        values.push(v);
    }
    if values.len() != grid_n + 1 {
        return Err(AppError::format(
            file,
            format!("header says N = {grid_n} but found {} rows", values.len()),
        ));
    }
    let path = Path::on_interval(values, spatial_point, t_start, t_end, kind)?;
    let meta = PathMeta {
        kind,
        grid_n,
        spatial_point,
        t_start,
        t_end,
        seed,
        params,
    };
    Ok((path, meta))
}

pub fn write_path_json(file: &FsPath, path: &Path, meta: &PathMeta) -> AppResult<()> {
    write_json(
        file,
        &PathJson {
            meta: meta.clone(),
            values: path.values().to_vec(),
        },
    )
}

pub fn read_path_json(file: &FsPath) -> AppResult<(Path, PathMeta)> {
    let p: PathJson = read_json(file)?;
    if p.values.len() != p.meta.grid_n + 1 {
        return Err(AppError::format(file, "grid_n does not match the number of values"));
    }
    let path = Path::on_interval(p.values, p.meta.spatial_point, p.meta.t_start, p.meta.t_end, p.meta.kind)?;
    Ok((path, p.meta))
}

/// Reads a path, choosing the format from the extension (`.json` or CSV).
pub fn read_path(file: &FsPath) -> AppResult<(Path, PathMeta)> {
    match file.extension().and_then(|e| e.to_str()) {
        Some("json") => read_path_json(file),
        _ => read_path_csv(file),
    }
}

pub fn write_json<T: Serialize>(file: &FsPath, value: &T) -> AppResult<()> {
    let mut w = create(file)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| AppError::format(file, e.to_string()))?;
    writeln!(w).map_err(|e| AppError::io(file, e))?;
    w.flush().map_err(|e| AppError::io(file, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(file: &FsPath) -> AppResult<T> {
    let mut s = String::new();
    open(file)?
        .read_to_string(&mut s)
        .map_err(|e| AppError::io(file, e))?;
    serde_json::from_str(&s).map_err(|e| AppError::format(file, e.to_string()))
}

/// Writes rows of plain records with a header.
pub fn write_csv<T: Serialize>(file: &FsPath, rows: &[T]) -> AppResult<()> {
    let w = create(file)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r).map_err(|e| AppError::format(file, e.to_string()))?;
    }
    csv.flush().map_err(|e| AppError::io(file, e))
}

/// One CSV row per variation result: `kind, N, alpha_or_H, p, statistic`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationRow {
    pub kind: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha_or_h: Option<f64>,
    pub p: f64,
    pub statistic: f64,
}

impl From<&VariationResult> for VariationRow {
    fn from(v: &VariationResult) -> Self {
        Self {
            kind: v.kind.as_str().to_string(),
            n: v.grid_n,
            alpha_or_h: v.parameter,
            p: v.p,
            statistic: v.statistic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSidecar {
    pub rows: usize,
    pub cols: usize,
    pub dx: f64,
    pub dt: f64,
    pub alpha: f64,
    pub theta: f64,
    pub seed: u64,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub dtype: String,
    pub layout: String,
}

/// Snapshots as little-endian `f64`, one row per snapshot, plus a JSON sidecar.
pub fn write_snapshots(
    bin: &FsPath,
    sidecar: &FsPath,
    snapshots: &[Snapshot],
    meta: SnapshotSidecar,
) -> AppResult<()> {
    let mut w = create(bin)?;
    for s in snapshots {
        for v in &s.field {
            w.write_all(&v.to_le_bytes()).map_err(|e| AppError::io(bin, e))?;
        }
    }
    w.flush().map_err(|e| AppError::io(bin, e))?;
    write_json(sidecar, &meta)
}

pub fn read_snapshots(bin: &FsPath, sidecar: &FsPath) -> AppResult<(SnapshotSidecar, Vec<Vec<f64>>)> {
    let meta: SnapshotSidecar = read_json(sidecar)?;
    let mut bytes = Vec::new();
    open(bin)?
        .read_to_end(&mut bytes)
        .map_err(|e| AppError::io(bin, e))?;
    if bytes.len() != meta.rows * meta.cols * 8 {
        return Err(AppError::format(bin, "size does not match the sidecar dimensions"));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let rows = vals.chunks(meta.cols.max(1)).map(|c| c.to_vec()).collect();
    Ok((meta, rows))
}
