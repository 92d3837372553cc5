//! ROC-AUC through the Mann-Whitney U statistic.

use alloc::vec::Vec;

use crate::error::SelectionError;

/// Area under the ROC curve for binary `labels` (1 = positive) and
/// `scores` (higher = more positive).
///
/// Equals `P(score+ > score-) + P(score+ = score-) / 2` over all
/// positive/negative pairs. Computed from average ranks in O(m log m); the
/// rank sum is kept doubled in integers, so the result is exactly the pair
/// count divided by `n_pos * n_neg`.
pub fn auroc(labels: &[u8], scores: &[f64]) -> Result<f64, SelectionError> {
    if labels.len() != scores.len() {
        return Err(SelectionError::LengthMismatch {
            labels: labels.len(),
            scores: scores.len(),
        });
    }
    let mut positives = 0u64;
    for (index, &value) in labels.iter().enumerate() {
        match value {
            0 => {}
            1 => positives += 1,
            _ => return Err(SelectionError::NonBinaryLabel { index, value }),
        }
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(SelectionError::NonFinite { index });
    }
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(SelectionError::SingleClass {
            positives: positives as usize,
            negatives: negatives as usize,
        });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum of the positives. A tie block at 0-based positions
    // start..end shares rank (start + 1 + end) / 2.
    let mut doubled_rank_sum = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let block_positives = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count() as u64;
        doubled_rank_sum += block_positives * (start as u64 + 1 + end as u64);
        start = end;
    }

    let doubled_u = doubled_rank_sum - positives * (positives + 1);
    Ok(doubled_u as f64 / (2 * positives * negatives) as f64)
}
