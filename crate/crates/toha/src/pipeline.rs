//! The steps behind each CLI command, as plain functions over in-memory
//! values plus thin file wrappers.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toha_core::msf::full_mst_length;
use toha_core::{auroc, mtop_div, predict, select_heads, DivergenceTable, HeadId, SelectionResult};

use crate::cache::{format_f64, write_cache, CacheRow};
use crate::container::AttentionContainer;
use crate::error::{Error, IoContext, Result};
use crate::manifest::{read_manifest_unchecked, Manifest};

/// Environment variable that overrides `--threads`.
pub const THREADS_ENV: &str = "TOHA_THREADS";

/// Which per-head graph statistic fills the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// MTop-Div of the prompt/response split, divided by `|R|`.
    #[default]
    MtopDivNormalized,
    /// MST length of the whole graph, prompt-prompt edges included, divided
    /// by `|R|`.
    MstFullGraph,
}

impl ScoreVariant {
    pub fn score(self, g: &toha_core::DistanceGraph) -> f64 {
        match self {
            ScoreVariant::MtopDivNormalized => mtop_div(g).total_length,
            ScoreVariant::MstFullGraph => full_mst_length(g),
        }
    }
}

/// Cache rows of one sample, layer-major and head-minor.
pub fn sample_rows(
    sample_id: &str,
    c: &AttentionContainer,
    variant: ScoreVariant,
) -> Result<Vec<CacheRow>> {
    let n_response = c.n_tokens() - c.prompt_len();
    let heads: Vec<(u32, u32)> = (0..c.n_layers())
        .flat_map(|l| (0..c.n_heads()).map(move |h| (l, h)))
        .collect();
    heads
        .par_iter()
        .map(|&(layer, head)| {
            let g = c.graph(layer, head)?;
            let value = variant.score(&g);
            Ok(CacheRow {
                sample_id: sample_id.to_string(),
                layer,
                head,
                n_response,
                mtop_div: value,
                normalized: value / f64::from(n_response),
            })
        })
        .collect()
}

/// Parses a `--threads` value: a positive count or `auto` (0).
pub fn parse_threads(s: &str) -> Result<usize> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("auto") {
        return Ok(0);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(Error::Invalid(format!(
            "threads must be a positive integer or \"auto\", got {s:?}"
        ))),
    }
}

/// `TOHA_THREADS` wins over the command-line value; 0 means rayon's default.
pub fn resolve_threads(cli: Option<&str>) -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => parse_threads(&v),
        _ => cli.map_or(Ok(0), parse_threads),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleFailure {
    pub sample_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRun {
    pub rows: Vec<CacheRow>,
    pub failures: Vec<SampleFailure>,
}

/// Computes cache rows for every sample of the manifest on `threads`
/// workers. Output order is manifest order regardless of scheduling; a
/// sample whose container cannot be read is reported and skipped.
pub fn compute_divergences(
    manifest: &Manifest,
    variant: ScoreVariant,
    threads: usize,
) -> Result<DivergenceRun> {
    let per_sample: Vec<Result<Vec<CacheRow>>> = pool(threads)?.install(|| {
        manifest
            .samples
            .par_iter()
            .map(|s| {
                let c = manifest.open_container(s)?;
                sample_rows(&s.id, &c, variant)
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in manifest.samples.iter().zip(per_sample) {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => {
                log::error!("sample {:?}: {e}", s.id);
                failures.push(SampleFailure {
                    sample_id: s.id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(DivergenceRun { rows, failures })
}

/// Path of the per-sample error log written next to a cache.
pub fn error_log_path(cache: &Path) -> PathBuf {
    let mut name = cache.file_name().unwrap_or_default().to_os_string();
    name.push(".errors.log");
    cache.with_file_name(name)
}

/// `divergence`: manifest in, cache CSV out (atomically). Failed samples go
/// to `<out>.errors.log`.
pub fn run_divergence(
    manifest_path: &Path,
    out: &Path,
    variant: ScoreVariant,
    threads: usize,
) -> Result<DivergenceRun> {
    let manifest = read_manifest_unchecked(manifest_path)?;
    let run = compute_divergences(&manifest, variant, threads)?;
    write_cache(&run.rows, out)?;
    let log_path = error_log_path(out);
    if run.failures.is_empty() {
        if log_path.exists() {
            std::fs::remove_file(&log_path).at(&log_path)?;
        }
    } else {
        let text: String = run
            .failures
            .iter()
            .map(|f| format!("{}\t{}\n", f.sample_id, f.message.replace('\n', " ")))
            .collect();
        crate::io::write_atomic(&log_path, text.as_bytes())?;
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadRef {
    pub layer: u32,
    pub head: u32,
}

impl From<HeadId> for HeadRef {
    fn from(h: HeadId) -> Self {
        Self {
            layer: h.layer,
            head: h.head,
        }
    }
}

impl From<HeadRef> for HeadId {
    fn from(h: HeadRef) -> Self {
        HeadId::new(h.layer, h.head)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeBalance {
    pub hallucinated: usize,
    pub grounded: usize,
}

/// JSON output of `select`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub ranked_heads: Vec<HeadRef>,
    /// Aligned with `ranked_heads`.
    pub deltas: Vec<f64>,
    pub n_opt: usize,
    pub probe_auroc_trace: Vec<f64>,
    pub best_auroc: f64,
    pub n_max: usize,
    pub probe_balance: ProbeBalance,
    pub probe_ids: Vec<String>,
    pub seed: u64,
    pub config_digest: String,
}

impl SelectionReport {
    pub fn from_result(
        r: &SelectionResult,
        probe_ids: Vec<String>,
        seed: u64,
        config_digest: String,
    ) -> Self {
        Self {
            ranked_heads: r.ranked_heads.iter().map(|&h| h.into()).collect(),
            deltas: r.deltas.clone(),
            n_opt: r.n_opt,
            probe_auroc_trace: r.probe_auroc_trace.clone(),
            best_auroc: r.best_auroc,
            n_max: r.n_max(),
            probe_balance: ProbeBalance {
                hallucinated: r.positives,
                grounded: r.negatives,
            },
            probe_ids,
            seed,
            config_digest,
        }
    }

    pub fn to_result(&self) -> Result<SelectionResult> {
        if self.n_opt == 0 || self.n_opt > self.ranked_heads.len() {
            return Err(Error::Invalid(format!(
                "selection n_opt = {} with {} ranked heads",
                self.n_opt,
                self.ranked_heads.len()
            )));
        }
        if self.deltas.len() != self.ranked_heads.len() {
            return Err(Error::Invalid(
                "selection deltas and heads differ in length".into(),
            ));
        }
        Ok(SelectionResult {
            ranked_heads: self.ranked_heads.iter().map(|&h| h.into()).collect(),
            deltas: self.deltas.clone(),
            n_opt: self.n_opt,
            probe_auroc_trace: self.probe_auroc_trace.clone(),
            best_auroc: self.best_auroc,
            n_max_requested: self.n_max,
            positives: self.probe_balance.hallucinated,
            negatives: self.probe_balance.grounded,
        })
    }

    pub fn selected_heads(&self) -> &[HeadRef] {
        &self.ranked_heads[..self.n_opt.min(self.ranked_heads.len())]
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of everything that determines a selection: cache contents,
/// probe ids, `n_max`, and seed.
pub fn config_digest(cache_digest: &str, probe_ids: &[String], n_max: usize, seed: u64) -> String {
    let mut text = format!("cache={cache_digest}\nn_max={n_max}\nseed={seed}\nprobe=");
    for id in probe_ids {
        text.push_str(id);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

/// Head selection on the probe samples of a labeled table.
pub fn select(
    table: &DivergenceTable,
    probe_ids: &[String],
    n_max: usize,
    seed: u64,
    cache_digest: &str,
) -> Result<SelectionReport> {
    let probe = table.subset(probe_ids)?;
    let result = select_heads(&probe, n_max)?;
    if result.n_max_clamped() {
        log::warn!(
            "n_max = {} exceeds the {} available heads; using {}",
            n_max,
            table.n_heads(),
            result.n_max()
        );
    }
    let digest = config_digest(cache_digest, probe_ids, n_max, seed);
    Ok(SelectionReport::from_result(
        &result,
        probe_ids.to_vec(),
        seed,
        digest,
    ))
}

/// Averages the selected heads for each test sample.
pub fn score(
    table: &DivergenceTable,
    test_ids: &[String],
    report: &SelectionReport,
) -> Result<Vec<(String, f64)>> {
    let test = table.subset(test_ids)?;
    let scores = predict(&test, &report.to_result()?)?;
    Ok(test_ids.iter().cloned().zip(scores).collect())
}

pub fn scores_to_bytes(scores: &[(String, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["sample_id", "score"])?;
    for (id, s) in scores {
        w.write_record([id.as_str(), &format_f64(*s)])?;
    }
    w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
}

pub fn parse_scores(bytes: &[u8]) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    if header.iter().ne(["sample_id", "score"]) {
        return Err(Error::Invalid(format!(
            "unexpected scores header {header:?}"
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let score = rec
                .get(1)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|s| s.is_finite())
                .ok_or_else(|| Error::Invalid(format!("bad score in record {rec:?}")))?;
            Ok((rec.get(0).unwrap_or_default().to_string(), score))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// AUROC of scores against manifest labels.
pub fn evaluate(scores: &[(String, f64)], labels: &Manifest) -> Result<Metrics> {
    if scores.is_empty() {
        return Err(Error::Invalid("empty test set".into()));
    }
    let mut y = Vec::with_capacity(scores.len());
    let mut s = Vec::with_capacity(scores.len());
    for (id, score) in scores {
        let label = labels
            .label(id)
            .ok_or_else(|| Error::Invalid(format!("sample {id:?} has no label in the manifest")))?;
        y.push(label);
        s.push(*score);
    }
    let n_pos = y.iter().filter(|&&l| l == 1).count();
    Ok(Metrics {
        auroc: auroc(&y, &s)?,
        n_pos,
        n_neg: y.len() - n_pos,
    })
}

/// Per-head deltas of two labeled tables over the same head grid.
pub fn analyze(a: &DivergenceTable, b: &DivergenceTable) -> Result<Vec<(HeadId, f64, f64)>> {
    if a.heads() != b.heads() {
        return Err(Error::Invalid(format!(
            "head grids differ: {} heads vs {} heads",
            a.n_heads(),
            b.n_heads()
        )));
    }
    let labeled = |t: &DivergenceTable| -> Result<DivergenceTable> {
        let ids: Vec<&str> = t
            .sample_ids()
            .iter()
            .zip(t.labels())
            .filter(|(_, l)| l.is_some())
            .map(|(id, _)| id.as_str())
            .collect();
        Ok(t.subset(&ids)?)
    };
    let da = labeled(a)?.deltas()?;
    let db = labeled(b)?.deltas()?;
    Ok(a.heads()
        .iter()
        .zip(da.into_iter().zip(db))
        .map(|(&h, (x, y))| (h, x, y))
        .collect())
}

pub fn deltas_to_bytes(rows: &[(HeadId, f64, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["layer", "head", "delta_A", "delta_B"])?;
    for (h, a, b) in rows {
        w.write_record([
            h.layer.to_string(),
            h.head.to_string(),
            format_f64(*a),
            format_f64(*b),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
}

/// Reads an id list: a file with one id per line (blank lines and `#`
/// comments skipped), or an inline comma-separated list.
pub fn parse_ids(arg: &str) -> Result<Vec<String>> {
    let path = Path::new(arg);
    let ids: Vec<String> = if path.is_file() {
        std::fs::read_to_string(path)
            .at(path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect()
    } else {
        arg.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    };
    let mut seen = HashSet::new();
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    if ids.is_empty() {
        return Err(Error::Invalid(format!("no ids in {arg:?}")));
    }
    Ok(ids)
}

pub fn ids_to_text(ids: &[String]) -> String {
    ids.iter().map(|id| format!("{id}\n")).collect()
}

/// Shuffles `ids` with `seed`, takes `round(test_fraction * n)` as the test
/// set and the next `probe_size` as the probe set.
pub fn make_split(
    ids: &[String],
    seed: u64,
    test_fraction: f64,
    probe_size: usize,
) -> Result<(Vec<String>, Vec<String>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (ids.len() as f64 * test_fraction).round() as usize;
    let test = shuffled[..n_test].to_vec();
    let rest = &shuffled[n_test..];
    let probe = rest[..probe_size.min(rest.len())].to_vec();
    if probe.is_empty() || test.is_empty() {
        return Err(Error::Invalid(format!(
            "split of {} ids leaves {} probe and {} test ids",
            ids.len(),
            probe.len(),
            test.len()
        )));
    }
    Ok((probe, test))
}

/// Parses `SEED:FRACTION`.
pub fn parse_split_arg(s: &str) -> Result<(u64, f64)> {
    let bad = || Error::Invalid(format!("--split expects SEED:FRACTION, got {s:?}"));
    let (seed, frac) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        seed.trim().parse().map_err(|_| bad())?,
        frac.trim().parse().map_err(|_| bad())?,
    ))
}
