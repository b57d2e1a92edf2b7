//! File formats: CSV with a schema comment line, JSON, JSON lines.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bis_core::sampler::{IterationRecord, WeightedSampleSet};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SCHEMA_VERSION;
use crate::error::{HarnessError, Result};

/// First line of every CSV the harness writes.
pub fn schema_comment() -> String {
    format!("# schema_version={SCHEMA_VERSION}")
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Writes to a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| HarnessError::format(path, e))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// CSV text with the schema comment, a header and `rows`.
pub fn csv_bytes<I>(header: &[String], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut out = Vec::new();
    out.extend_from_slice(schema_comment().as_bytes());
    out.push(b'\n');
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).expect("in-memory write");
        for r in rows {
            w.write_record(&r).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    out
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    write_atomic(path, &csv_bytes(header, rows))
}

/// Header and rows of a CSV, skipping `#` comment lines.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| HarnessError::format(path, e))?;
    let header = r
        .headers()
        .map_err(|e| HarnessError::format(path, e))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::format(path, e))?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| HarnessError::format(path, format!("not a number: {s:?}")))
}

fn coord_names(dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("x{j}")).collect()
}

/// Weighted sample CSV: `x0..x{d-1}, log_ratio, weight`.
pub fn samples_csv_bytes(set: &WeightedSampleSet) -> Vec<u8> {
    let mut header = coord_names(set.dim());
    header.push("log_ratio".into());
    header.push("weight".into());
    let rows = set
        .points
        .iter()
        .zip(&set.log_ratios)
        .zip(&set.weights)
        .map(|((p, l), w)| {
            let mut r: Vec<String> = p.iter().map(|x| fmt_f64(*x)).collect();
            r.push(fmt_f64(*l));
            r.push(fmt_f64(*w));
            r
        });
    csv_bytes(&header, rows)
}

pub fn write_samples(path: &Path, set: &WeightedSampleSet) -> Result<()> {
    write_atomic(path, &samples_csv_bytes(set))
}

/// Reads a sample CSV; weights are recomputed from the log ratios.
pub fn read_samples(path: &Path) -> Result<WeightedSampleSet> {
    let (header, rows) = read_csv(path)?;
    let dim = header.iter().take_while(|h| h.starts_with('x')).count();
    let li = header
        .iter()
        .position(|h| h == "log_ratio")
        .ok_or_else(|| HarnessError::format(path, "missing log_ratio column"))?;
    let mut points = Vec::with_capacity(rows.len());
    let mut ratios = Vec::with_capacity(rows.len());
    for r in &rows {
        let p = r[..dim]
            .iter()
            .map(|s| parse_f64(path, s))
            .collect::<Result<Vec<_>>>()?;
        points.push(p);
        ratios.push(parse_f64(path, &r[li])?);
    }
    Ok(WeightedSampleSet::from_log_ratios(points, ratios)?)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a IterationRecord,
}

/// One JSON object per evaluation.
pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let f = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in trace {
        let line = TraceLine {
            schema_version: SCHEMA_VERSION,
            record: r,
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| HarnessError::format(path, e))?;
        w.write_all(b"\n").map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
