//! Head statistics and the two phases of head-averaged hallucination
//! scoring: ranking heads on a labeled probe set and choosing how many to
//! average, then scoring unseen samples with the chosen heads.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::auroc::auroc;
use crate::error::SelectionError;

/// Cap on the number of averaged heads unless the caller says otherwise.
pub const DEFAULT_N_MAX: usize = 10;

/// An attention head, ordered by `(layer, head)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeadId {
    pub layer: u32,
    pub head: u32,
}

impl HeadId {
    pub const fn new(layer: u32, head: u32) -> Self {
        Self { layer, head }
    }
}

/// Per-sample, per-head divergence values plus optional binary labels
/// (1 = hallucinated).
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceTable {
    heads: Vec<HeadId>,
    sample_ids: Vec<String>,
    /// Row-major: `values[s * heads.len() + h]`.
    values: Vec<f64>,
    labels: Vec<Option<u8>>,
}

impl DivergenceTable {
    pub fn new(
        heads: Vec<HeadId>,
        sample_ids: Vec<String>,
        values: Vec<f64>,
        labels: Vec<Option<u8>>,
    ) -> Result<Self, SelectionError> {
        let expected = heads.len() * sample_ids.len();
        if values.len() != expected {
            return Err(SelectionError::Shape {
                expected,
                actual: values.len(),
            });
        }
        if labels.len() != sample_ids.len() {
            return Err(SelectionError::LengthMismatch {
                labels: labels.len(),
                scores: sample_ids.len(),
            });
        }
        let mut sorted = heads.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(SelectionError::DuplicateHead {
                layer: w[0].layer,
                head: w[0].head,
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(SelectionError::NonFinite { index });
        }
        for (index, label) in labels.iter().enumerate() {
            if let Some(value) = *label {
                if value > 1 {
                    return Err(SelectionError::NonBinaryLabel { index, value });
                }
            }
        }
        Ok(Self {
            heads,
            sample_ids,
            values,
            labels,
        })
    }

    pub fn heads(&self) -> &[HeadId] {
        &self.heads
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn value(&self, sample: usize, head: usize) -> f64 {
        self.values[sample * self.heads.len() + head]
    }

    /// All head values of one sample, in `heads()` order.
    pub fn row(&self, sample: usize) -> &[f64] {
        let h = self.heads.len();
        &self.values[sample * h..(sample + 1) * h]
    }

    pub fn head_index(&self, head: HeadId) -> Option<usize> {
        self.heads.iter().position(|&h| h == head)
    }

    pub fn sample_index(&self, id: &str) -> Option<usize> {
        self.sample_ids.iter().position(|s| s == id)
    }

    /// Values of one head across samples.
    pub fn column(&self, head: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples()).map(move |s| self.value(s, head))
    }

    /// The table restricted to `ids`, in the order given.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self, SelectionError> {
        let h = self.heads.len();
        let mut sample_ids = Vec::with_capacity(ids.len());
        let mut values = Vec::with_capacity(ids.len() * h);
        let mut labels = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let s = self
                .sample_index(id)
                .ok_or_else(|| SelectionError::UnknownSample(id.into()))?;
            sample_ids.push(self.sample_ids[s].clone());
            values.extend_from_slice(self.row(s));
            labels.push(self.labels[s]);
        }
        Ok(Self {
            heads: self.heads.clone(),
            sample_ids,
            values,
            labels,
        })
    }

    /// Replaces all labels.
    pub fn with_labels(mut self, labels: Vec<Option<u8>>) -> Result<Self, SelectionError> {
        if labels.len() != self.sample_ids.len() {
            return Err(SelectionError::LengthMismatch {
                labels: labels.len(),
                scores: self.sample_ids.len(),
            });
        }
        for (index, label) in labels.iter().enumerate() {
            if let Some(value) = *label {
                if value > 1 {
                    return Err(SelectionError::NonBinaryLabel { index, value });
                }
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Labels of every sample; errors if any is missing.
    pub fn require_labels(&self) -> Result<Vec<u8>, SelectionError> {
        self.labels
            .iter()
            .enumerate()
            .map(|(sample, l)| l.ok_or(SelectionError::MissingLabel { sample }))
            .collect()
    }

    /// Head-separation statistic of every head, in `heads()` order.
    pub fn deltas(&self) -> Result<Vec<f64>, SelectionError> {
        let labels = self.require_labels()?;
        let mut out = Vec::with_capacity(self.n_heads());
        let mut hallu = Vec::new();
        let mut grounded = Vec::new();
        for h in 0..self.n_heads() {
            hallu.clear();
            grounded.clear();
            for (s, &y) in labels.iter().enumerate() {
                let v = self.value(s, h);
                if y == 1 {
                    hallu.push(v);
                } else {
                    grounded.push(v);
                }
            }
            out.push(delta(&hallu, &grounded)?);
        }
        Ok(out)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean over hallucinated samples minus mean over grounded samples.
pub fn delta(hallu: &[f64], grounded: &[f64]) -> Result<f64, SelectionError> {
    if hallu.is_empty() || grounded.is_empty() {
        return Err(SelectionError::EmptyClass);
    }
    Ok(mean(hallu) - mean(grounded))
}

/// Outcome of ranking heads on a probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// All heads, by descending delta; equal deltas by ascending `(layer, head)`.
    pub ranked_heads: Vec<HeadId>,
    /// Delta of each entry of `ranked_heads`.
    pub deltas: Vec<f64>,
    pub n_opt: usize,
    /// Probe AUROC when averaging the top `N` heads, `N = 1..=n_max`.
    pub probe_auroc_trace: Vec<f64>,
    pub best_auroc: f64,
    /// `n_max` as requested; the trace length is `min(n_max, heads)`.
    pub n_max_requested: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl SelectionResult {
    /// The `n_opt` heads used for prediction.
    pub fn selected_heads(&self) -> &[HeadId] {
        &self.ranked_heads[..self.n_opt]
    }

    /// Effective cap after clamping to the number of heads.
    pub fn n_max(&self) -> usize {
        self.probe_auroc_trace.len()
    }

    pub fn n_max_clamped(&self) -> bool {
        self.n_max() < self.n_max_requested
    }
}

/// Ranks heads by delta on a labeled probe table and picks how many of the
/// top heads to average.
///
/// Running scores follow `p <- ((N-1)/N) p + d_N / N`, so after step `N`
/// each `p_s` is the mean of the top `N` head values. `n_opt` only moves on
/// strict AUROC improvement, so ties keep the smaller `N`. `n_max` above the
/// number of heads is clamped (see [`SelectionResult::n_max_clamped`]).
pub fn select_heads(
    table: &DivergenceTable,
    n_max: usize,
) -> Result<SelectionResult, SelectionError> {
    if n_max == 0 || table.n_heads() == 0 {
        return Err(SelectionError::NoHeads);
    }
    let labels = table.require_labels()?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(SelectionError::SingleClass {
            positives,
            negatives,
        });
    }

    let raw_deltas = table.deltas()?;
    let mut order: Vec<usize> = (0..table.n_heads()).collect();
    order.sort_by(|&a, &b| match raw_deltas[b].total_cmp(&raw_deltas[a]) {
        Ordering::Equal => table.heads[a].cmp(&table.heads[b]),
        other => other,
    });

    let n_eff = n_max.min(table.n_heads());
    let mut scores = alloc::vec![0.0_f64; table.n_samples()];
    let mut trace = Vec::with_capacity(n_eff);
    let mut n_opt = 1;
    let mut best = 0.0;
    for n in 1..=n_eff {
        let head = order[n - 1];
        let keep = (n - 1) as f64 / n as f64;
        let add = 1.0 / n as f64;
        for (s, p) in scores.iter_mut().enumerate() {
            *p = keep * *p + add * table.value(s, head);
        }
        let a = auroc(&labels, &scores)?;
        trace.push(a);
        if a > best {
            best = a;
            n_opt = n;
        }
    }

    Ok(SelectionResult {
        ranked_heads: order.iter().map(|&h| table.heads[h]).collect(),
        deltas: order.iter().map(|&h| raw_deltas[h]).collect(),
        n_opt,
        best_auroc: trace[n_opt - 1],
        probe_auroc_trace: trace,
        n_max_requested: n_max,
        positives,
        negatives,
    })
}

/// Scores each sample of `table` as the mean value of the selected heads.
pub fn predict(
    table: &DivergenceTable,
    selection: &SelectionResult,
) -> Result<Vec<f64>, SelectionError> {
    let columns = selection
        .selected_heads()
        .iter()
        .map(|&h| {
            table.head_index(h).ok_or(SelectionError::MissingHead {
                layer: h.layer,
                head: h.head,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if columns.is_empty() {
        return Err(SelectionError::NoHeads);
    }
    let n = columns.len() as f64;
    Ok((0..table.n_samples())
        .map(|s| columns.iter().map(|&c| table.value(s, c)).sum::<f64>() / n)
        .collect())
}
