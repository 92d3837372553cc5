//! Minimal spanning forest attaching the response to the prompt, its
//! 0-dimensional barcode, and plain MST lengths.
//!
//! Zeroing every prompt-prompt distance and running Kruskal on the result
//! accepts all those zero edges first, so the prompt behaves as a single
//! pre-merged component. The forest edges that remain are exactly the
//! deaths of the 0-dimensional barcode of the modified graph: one bar
//! `[0, w]` per response vertex.

use alloc::vec::Vec;

use crate::dsu::DisjointSets;
use crate::error::GraphError;
use crate::graph::DistanceGraph;

/// From this many vertices on, [`mtop_div`] uses the O(n^2) Prim variant
/// instead of sorting every edge.
pub const PRIM_THRESHOLD: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsfEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Forest attaching every response vertex to the merged prompt block.
#[derive(Debug, Clone, PartialEq)]
pub struct MsfResult {
    pub total_length: f64,
    /// One edge per response vertex, in acceptance order, `u < v`.
    pub edges: Vec<MsfEdge>,
}

impl MsfResult {
    fn from_edges(edges: Vec<MsfEdge>) -> Self {
        let total_length = edges.iter().map(|e| e.weight).sum();
        Self {
            total_length,
            edges,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub birth: f64,
    pub death: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.death - self.birth
    }
}

/// 0-dimensional persistence barcode (finite bars only).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Barcode0 {
    pub intervals: Vec<Interval>,
}

impl Barcode0 {
    /// Sum of bar lengths, accumulated in bar order.
    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(Interval::length).sum()
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// MTop-Div of the graph: the length of the minimal spanning forest that
/// attaches the response vertices to the prompt.
///
/// Uses Kruskal below [`PRIM_THRESHOLD`] vertices and Prim above it. The
/// two agree on `total_length` up to summation order; the edge lists may
/// differ when distances tie.
pub fn mtop_div(g: &DistanceGraph) -> MsfResult {
    if g.n() >= PRIM_THRESHOLD {
        mtop_div_prim(g)
    } else {
        mtop_div_kruskal(g)
    }
}

/// Kruskal over all prompt-response and response-response edges, with the
/// prompt pre-merged. Edges are ordered by `(weight, min endpoint, max
/// endpoint)`, which fixes the witness forest.
pub fn mtop_div_kruskal(g: &DistanceGraph) -> MsfResult {
    let n = g.n();
    let p = g.prompt_len();
    let r = g.response_len();

    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(r * p + r * (r - 1) / 2);
    for v in p..n {
        for (u, &d) in g.lower_row(v)[..v].iter().enumerate() {
            candidates.push((d, u as u32, v as u32));
        }
    }
    candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut sets = DisjointSets::with_merged_prefix(n, p);
    let mut edges = Vec::with_capacity(r);
    for (weight, u, v) in candidates {
        let (u, v) = (u as usize, v as usize);
        if sets.union(u, v) {
            edges.push(MsfEdge { u, v, weight });
            if edges.len() == r {
                break;
            }
        }
    }
    debug_assert_eq!(edges.len(), r);
    MsfResult::from_edges(edges)
}

/// Prim over the implicit complete graph, growing from the merged prompt.
/// O(|R| * n) time, no edge materialization.
pub fn mtop_div_prim(g: &DistanceGraph) -> MsfResult {
    let n = g.n();
    let p = g.prompt_len();
    let r = g.response_len();

    // key[k] / parent[k] describe response vertex p + k.
    let mut key = Vec::with_capacity(r);
    let mut parent = Vec::with_capacity(r);
    for v in p..n {
        let row = &g.lower_row(v)[..p];
        let mut best = (row[0], 0);
        for (u, &d) in row.iter().enumerate().skip(1) {
            if d < best.0 {
                best = (d, u);
            }
        }
        key.push(best.0);
        parent.push(best.1);
    }

    let mut attached = alloc::vec![false; r];
    let mut edges = Vec::with_capacity(r);
    for _ in 0..r {
        let mut pick = usize::MAX;
        let mut pick_key = f64::INFINITY;
        for k in 0..r {
            if !attached[k] && (pick == usize::MAX || key[k] < pick_key) {
                pick = k;
                pick_key = key[k];
            }
        }
        attached[pick] = true;
        let v = p + pick;
        let u = parent[pick];
        edges.push(MsfEdge {
            u: u.min(v),
            v: u.max(v),
            weight: pick_key,
        });
        for k in 0..r {
            if attached[k] {
                continue;
            }
            let d = g.dist(v, p + k);
            if d < key[k] {
                key[k] = d;
                parent[k] = v;
            }
        }
    }
    MsfResult::from_edges(edges)
}

/// 0-dimensional barcode of the graph with prompt-prompt distances zeroed:
/// one bar `[0, w_e]` per forest edge, in the order [`mtop_div`] accepts
/// them. Zero-length bars are kept, so there are exactly `|R|` of them.
pub fn barcode0(g: &DistanceGraph) -> Barcode0 {
    let msf = mtop_div(g);
    Barcode0 {
        intervals: msf
            .edges
            .iter()
            .map(|e| Interval {
                birth: 0.0,
                death: e.weight,
            })
            .collect(),
    }
}

/// MTop-Div divided by the response length; lies in `[0, 1]`.
pub fn normalized_divergence(g: &DistanceGraph) -> f64 {
    mtop_div(g).total_length / g.response_len() as f64
}

/// Total weight of a minimum spanning tree over `vertices` (Prim, O(k^2)).
/// A single vertex gives 0.
pub fn mst_length(g: &DistanceGraph, vertices: &[usize]) -> Result<f64, GraphError> {
    if vertices.is_empty() {
        return Err(GraphError::EmptySubset);
    }
    if let Some(&vertex) = vertices.iter().find(|&&v| v >= g.n()) {
        return Err(GraphError::VertexOutOfBounds { vertex, n: g.n() });
    }
    let k = vertices.len();
    let mut in_tree = alloc::vec![false; k];
    let mut key = alloc::vec![f64::INFINITY; k];
    key[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..k {
        let mut pick = usize::MAX;
        for i in 0..k {
            if !in_tree[i] && (pick == usize::MAX || key[i] < key[pick]) {
                pick = i;
            }
        }
        in_tree[pick] = true;
        total += key[pick];
        let a = vertices[pick];
        for i in 0..k {
            if !in_tree[i] {
                let d = g.dist(a, vertices[i]);
                if d < key[i] {
                    key[i] = d;
                }
            }
        }
    }
    Ok(total)
}

/// MST length of the whole graph, prompt-prompt distances included.
pub fn full_mst_length(g: &DistanceGraph) -> f64 {
    let all: Vec<usize> = (0..g.n()).collect();
    mst_length(g, &all).expect("graph has at least two vertices")
}

/// MST length of the prompt vertices alone.
pub fn prompt_mst_length(g: &DistanceGraph) -> f64 {
    let prompt: Vec<usize> = (0..g.prompt_len()).collect();
    mst_length(g, &prompt).expect("prompt is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn four_token() -> DistanceGraph {
        // d(0,1) = 0.35 is irrelevant: both endpoints are prompt.
        DistanceGraph::from_fn(4, 2, |i, j| match (j, i) {
            (0, 1) => 0.35,
            (0, 2) => 0.9,
            (1, 2) => 0.4,
            (0, 3) => 0.8,
            (1, 3) => 0.7,
            (2, 3) => 0.2,
            _ => unreachable!(),
        })
        .unwrap()
    }

    #[test]
    fn four_token_forest() {
        let g = four_token();
        let msf = mtop_div_kruskal(&g);
        assert_eq!(
            msf.edges,
            vec![
                MsfEdge {
                    u: 2,
                    v: 3,
                    weight: 0.2
                },
                MsfEdge {
                    u: 1,
                    v: 2,
                    weight: 0.4
                },
            ]
        );
        assert!((msf.total_length - 0.6).abs() < 1e-15);
        assert!((mtop_div_prim(&g).total_length - 0.6).abs() < 1e-15);
        assert!((normalized_divergence(&g) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn four_token_barcode() {
        let bars = barcode0(&four_token());
        let mut deaths: Vec<f64> = bars.intervals.iter().map(|i| i.death).collect();
        deaths.sort_by(f64::total_cmp);
        assert_eq!(deaths, vec![0.2, 0.4]);
        assert!(bars.intervals.iter().all(|i| i.birth == 0.0));
    }

    #[test]
    fn all_zero_and_all_one() {
        let zero = DistanceGraph::from_fn(6, 2, |_, _| 0.0).unwrap();
        assert_eq!(mtop_div(&zero).total_length, 0.0);
        assert_eq!(normalized_divergence(&zero), 0.0);
        let bars = barcode0(&zero);
        assert_eq!(bars.len(), 4);
        assert!(bars
            .intervals
            .iter()
            .all(|i| i.birth == 0.0 && i.death == 0.0));

        let one = DistanceGraph::from_fn(6, 2, |_, _| 1.0).unwrap();
        assert_eq!(mtop_div(&one).total_length, 4.0);
        assert_eq!(mtop_div_prim(&one).total_length, 4.0);
        assert_eq!(normalized_divergence(&one), 1.0);
    }

    #[test]
    fn mst_small_cases() {
        let tri = DistanceGraph::from_fn(3, 1, |i, j| match (j, i) {
            (0, 1) => 0.2,
            (0, 2) => 0.4,
            (1, 2) => 0.9,
            _ => unreachable!(),
        })
        .unwrap();
        assert_eq!(mst_length(&tri, &[1]).unwrap(), 0.0);
        assert!((mst_length(&tri, &[0, 1, 2]).unwrap() - 0.6).abs() < 1e-15);
        assert!((full_mst_length(&tri) - 0.6).abs() < 1e-15);
        assert_eq!(prompt_mst_length(&tri), 0.0);
        assert_eq!(mst_length(&tri, &[]), Err(GraphError::EmptySubset));
        assert_eq!(
            mst_length(&tri, &[0, 3]),
            Err(GraphError::VertexOutOfBounds { vertex: 3, n: 3 })
        );
    }

    #[test]
    fn ties_give_deterministic_witness() {
        let g = DistanceGraph::from_fn(5, 2, |_, _| 0.5).unwrap();
        let a = mtop_div_kruskal(&g);
        let b = mtop_div_kruskal(&g);
        assert_eq!(a, b);
        assert_eq!(
            a.edges[0],
            MsfEdge {
                u: 0,
                v: 2,
                weight: 0.5
            }
        );
        assert_eq!(a.total_length, 1.5);
    }
}
