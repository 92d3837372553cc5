//! Attention graphs: complete graphs over tokens whose edge lengths are
//! `1 - w` for the causal attention weight `w` linking the two tokens.

use alloc::vec::Vec;

use crate::error::GraphError;

/// Number of values in a packed lower triangle (diagonal included) of an
/// `n x n` matrix.
pub const fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

/// Symmetric pseudo-distance matrix over `n` tokens split into a prompt
/// prefix `0..prompt_len` and a response suffix `prompt_len..n`.
///
/// Only the lower triangle is stored. For `i > j` the distance of the
/// unordered pair `{i, j}` is `1 - w[i][j]`, the weight token `i` puts on
/// the earlier token `j`; the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceGraph {
    n: usize,
    prompt_len: usize,
    dist: Vec<f64>,
}

fn check_partition(n: usize, prompt_len: usize) -> Result<(), GraphError> {
    if prompt_len == 0 {
        return Err(GraphError::EmptyPrompt);
    }
    if prompt_len >= n {
        return Err(GraphError::EmptyResponse { n, prompt_len });
    }
    Ok(())
}

fn check_unit(index: usize, value: f64) -> Result<(), GraphError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(GraphError::OutOfRange { index, value });
    }
    Ok(())
}

impl DistanceGraph {
    /// Builds the graph from one head's packed lower-triangular attention
    /// map: row `i` holds `w[i][0..=i]`. Weights must already lie in `[0, 1]`.
    pub fn from_attention<T>(weights: &[T], n: usize, prompt_len: usize) -> Result<Self, GraphError>
    where
        T: Copy + Into<f64>,
    {
        check_partition(n, prompt_len)?;
        let expected = packed_len(n);
        if weights.len() != expected {
            return Err(GraphError::SizeMismatch {
                expected,
                actual: weights.len(),
            });
        }
        let mut dist = Vec::with_capacity(expected);
        let mut idx = 0;
        for i in 0..n {
            for j in 0..=i {
                let w: f64 = weights[idx].into();
                check_unit(idx, w)?;
                dist.push(if i == j { 0.0 } else { 1.0 - w });
                idx += 1;
            }
        }
        Ok(Self {
            n,
            prompt_len,
            dist,
        })
    }

    /// Builds the graph from packed lower-triangular distances. Diagonal
    /// entries are ignored and stored as zero.
    pub fn from_distances(
        mut dist: Vec<f64>,
        n: usize,
        prompt_len: usize,
    ) -> Result<Self, GraphError> {
        check_partition(n, prompt_len)?;
        let expected = packed_len(n);
        if dist.len() != expected {
            return Err(GraphError::SizeMismatch {
                expected,
                actual: dist.len(),
            });
        }
        for i in 0..n {
            let row = i * (i + 1) / 2;
            for j in 0..i {
                check_unit(row + j, dist[row + j])?;
            }
            dist[row + i] = 0.0;
        }
        Ok(Self {
            n,
            prompt_len,
            dist,
        })
    }

    /// Builds the graph by evaluating `f(i, j)` for every `i > j`.
    pub fn from_fn<F>(n: usize, prompt_len: usize, mut f: F) -> Result<Self, GraphError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let mut dist = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                dist.push(if i == j { 0.0 } else { f(i, j) });
            }
        }
        Self::from_distances(dist, n, prompt_len)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_len
    }

    pub fn response_len(&self) -> usize {
        self.n - self.prompt_len
    }

    pub fn is_prompt(&self, v: usize) -> bool {
        v < self.prompt_len
    }

    /// Distance between `i` and `j`. Panics if either index is out of range.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "vertex out of range");
        self.dist[packed_index(i, j)]
    }

    /// Packed lower triangle, row-major, diagonal included.
    pub fn packed(&self) -> &[f64] {
        &self.dist
    }

    /// Row `i` of the packed lower triangle: distances to vertices `0..=i`.
    #[inline]
    pub(crate) fn lower_row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.dist[start..start + i + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn full_attention_is_zero_distance() {
        let g = DistanceGraph::from_attention(&[1.0_f64, 1.0, 0.0], 2, 1).unwrap();
        assert_eq!(g.dist(0, 1), 0.0);
        assert_eq!(g.dist(1, 0), 0.0);
    }

    #[test]
    fn no_attention_is_unit_distance() {
        let g = DistanceGraph::from_attention(&[1.0_f64, 0.0, 1.0], 2, 1).unwrap();
        assert_eq!(g.dist(0, 1), 1.0);
    }

    #[test]
    fn three_token_hand_computed() {
        let w = [1.0_f64, 0.3, 0.7, 0.2, 0.5, 0.3];
        let g = DistanceGraph::from_attention(&w, 3, 1).unwrap();
        assert!((g.dist(0, 1) - 0.7).abs() < 1e-15);
        assert!((g.dist(0, 2) - 0.8).abs() < 1e-15);
        assert!((g.dist(1, 2) - 0.5).abs() < 1e-15);
        for i in 0..3 {
            assert_eq!(g.dist(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(g.dist(i, j), g.dist(j, i));
            }
        }
    }

    #[test]
    fn f32_weights_are_widened() {
        let w = [1.0_f32, 0.25, 0.75];
        let g = DistanceGraph::from_attention(&w, 2, 1).unwrap();
        assert_eq!(g.dist(1, 0), 0.75);
    }

    #[test]
    fn partition_violations() {
        let w = [1.0_f64, 0.5, 0.5];
        assert_eq!(
            DistanceGraph::from_attention(&w, 2, 0),
            Err(GraphError::EmptyPrompt)
        );
        assert_eq!(
            DistanceGraph::from_attention(&w, 2, 2),
            Err(GraphError::EmptyResponse {
                n: 2,
                prompt_len: 2
            })
        );
    }

    #[test]
    fn size_and_range_violations() {
        assert_eq!(
            DistanceGraph::from_attention(&[1.0_f64, 0.5], 2, 1),
            Err(GraphError::SizeMismatch {
                expected: 3,
                actual: 2
            })
        );
        assert!(matches!(
            DistanceGraph::from_attention(&[1.0_f64, 1.5, 0.0], 2, 1),
            Err(GraphError::OutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            DistanceGraph::from_attention(&[1.0_f64, f64::NAN, 0.0], 2, 1),
            Err(GraphError::OutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn from_distances_zeroes_diagonal() {
        let g = DistanceGraph::from_distances(vec![0.7, 0.4, 0.9], 2, 1).unwrap();
        assert_eq!(g.dist(0, 0), 0.0);
        assert_eq!(g.dist(1, 1), 0.0);
        assert_eq!(g.dist(0, 1), 0.4);
        assert_eq!(g.lower_row(1), &[0.4, 0.0]);
    }
}
