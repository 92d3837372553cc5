//! Divergence cache: one CSV row per (sample, layer, head).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use toha_core::{DivergenceTable, HeadId};

use crate::error::{Error, IoContext, Result};
use crate::manifest::Manifest;

pub const CACHE_HEADER: [&str; 6] = [
    "sample_id",
    "layer",
    "head",
    "n_response",
    "mtop_div",
    "normalized",
];

/// Tolerance on `normalized == mtop_div / n_response` when reading.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CacheRow {
    pub sample_id: String,
    pub layer: u32,
    pub head: u32,
    pub n_response: u32,
    /// Raw score of the graph: MTop-Div, or the full-graph MST length for
    /// the ablation variant.
    pub mtop_div: f64,
    pub normalized: f64,
}

/// Fixed 17-significant-digit rendering used in every output file.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn cache_to_bytes(rows: &[CacheRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CACHE_HEADER)?;
    for r in rows {
        w.write_record([
            r.sample_id.as_str(),
            &r.layer.to_string(),
            &r.head.to_string(),
            &r.n_response.to_string(),
            &format_f64(r.mtop_div),
            &format_f64(r.normalized),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Cache(e.to_string()))
}

pub fn write_cache(rows: &[CacheRow], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, &cache_to_bytes(rows)?)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Cache(format!("line {line}: bad {} field", CACHE_HEADER[i])))
}

pub fn parse_cache(bytes: &[u8]) -> Result<Vec<CacheRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().ne(CACHE_HEADER.iter().copied()) {
        return Err(Error::Cache(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = CacheRow {
            sample_id: rec.get(0).unwrap_or_default().to_string(),
            layer: parse_field(&rec, 1, line)?,
            head: parse_field(&rec, 2, line)?,
            n_response: parse_field(&rec, 3, line)?,
            mtop_div: parse_field(&rec, 4, line)?,
            normalized: parse_field(&rec, 5, line)?,
        };
        if row.n_response == 0 {
            return Err(Error::Cache(format!("line {line}: n_response is 0")));
        }
        if !row.mtop_div.is_finite() || !row.normalized.is_finite() {
            return Err(Error::Cache(format!("line {line}: non-finite value")));
        }
        if (row.normalized - row.mtop_div / row.n_response as f64).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Cache(format!(
                "line {line}: normalized {} != {} / {}",
                row.normalized, row.mtop_div, row.n_response
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_cache(path: &Path) -> Result<Vec<CacheRow>> {
    let bytes = std::fs::read(path).at(path)?;
    parse_cache(&bytes)
}

/// Builds the normalized-divergence table. Heads are sorted by
/// `(layer, head)`; samples keep first-appearance order. Every sample must
/// cover the same head grid exactly once.
pub fn rows_to_table(rows: &[CacheRow]) -> Result<DivergenceTable> {
    let heads: Vec<HeadId> = rows
        .iter()
        .map(|r| HeadId::new(r.layer, r.head))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let head_pos: HashMap<HeadId, usize> = heads.iter().enumerate().map(|(i, &h)| (h, i)).collect();

    let mut sample_ids: Vec<String> = Vec::new();
    let mut sample_pos: HashMap<&str, usize> = HashMap::new();
    for r in rows {
        if !sample_pos.contains_key(r.sample_id.as_str()) {
            sample_pos.insert(&r.sample_id, sample_ids.len());
            sample_ids.push(r.sample_id.clone());
        }
    }

    let h = heads.len();
    let mut values = vec![f64::NAN; sample_ids.len() * h];
    for r in rows {
        let cell = sample_pos[r.sample_id.as_str()] * h + head_pos[&HeadId::new(r.layer, r.head)];
        if !values[cell].is_nan() {
            return Err(Error::Cache(format!(
                "duplicate row for sample {:?}, layer {}, head {}",
                r.sample_id, r.layer, r.head
            )));
        }
        values[cell] = r.normalized;
    }
    if let Some(cell) = values.iter().position(|v| v.is_nan()) {
        let head = heads[cell % h];
        return Err(Error::Cache(format!(
            "incomplete: sample {:?} has no row for layer {}, head {}",
            sample_ids[cell / h],
            head.layer,
            head.head
        )));
    }
    let labels = vec![None; sample_ids.len()];
    Ok(DivergenceTable::new(heads, sample_ids, values, labels)?)
}

/// Loads a cache and attaches labels from the manifest (absent ids stay
/// unlabeled).
pub fn load_table(cache: &Path, labels: Option<&Manifest>) -> Result<DivergenceTable> {
    let table = rows_to_table(&read_cache(cache)?)?;
    match labels {
        None => Ok(table),
        Some(m) => {
            let l = table.sample_ids().iter().map(|id| m.label(id)).collect();
            Ok(table.with_labels(l)?)
        }
    }
}
