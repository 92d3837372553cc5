//! Independent reference implementations used by the property and
//! acceptance tests. Nothing here calls into the code under test except
//! for reading distances out of a `DistanceGraph`.
#![allow(dead_code)]

use rand::Rng;
use toha_core::DistanceGraph;

/// Calls `f` with every `k`-subset of `0..m`, as sorted index slices.
pub fn for_each_combination(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Flood fill over `nodes` vertices; true when every vertex is reachable
/// from vertex 0.
fn connected(nodes: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); nodes];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; nodes];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Minimum total weight over all edge sets that connect every response
/// vertex to the prompt (directly or through other response vertices).
///
/// Weights are non-negative, so it suffices to look at sets of exactly
/// `|R|` edges; every such set is checked by flood fill on the graph where
/// the prompt is one node.
pub fn brute_force_mtop(g: &DistanceGraph) -> f64 {
    let n = g.n();
    let p = g.prompt_len();
    let r = n - p;
    let node = |v: usize| if v < p { 0 } else { v - p + 1 };
    let mut candidates = Vec::new();
    for v in p..n {
        for u in 0..v {
            candidates.push((node(u), node(v), g.dist(u, v)));
        }
    }
    let mut best = f64::INFINITY;
    let mut edges = Vec::with_capacity(r);
    for_each_combination(candidates.len(), r, |pick| {
        edges.clear();
        edges.extend(pick.iter().map(|&i| (candidates[i].0, candidates[i].1)));
        if connected(r + 1, &edges) {
            let w: f64 = pick.iter().map(|&i| candidates[i].2).sum();
            if w < best {
                best = w;
            }
        }
    });
    best
}

/// Minimum spanning tree weight over `vertices` by enumerating every
/// `(k-1)`-edge subset and keeping the spanning trees.
/// Returns `(weight, number of spanning trees seen)`.
pub fn brute_force_mst(g: &DistanceGraph, vertices: &[usize]) -> (f64, usize) {
    let k = vertices.len();
    if k == 1 {
        return (0.0, 1);
    }
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            pairs.push((a, b, g.dist(vertices[a], vertices[b])));
        }
    }
    let mut best = f64::INFINITY;
    let mut trees = 0;
    let mut edges = Vec::new();
    for_each_combination(pairs.len(), k - 1, |pick| {
        edges.clear();
        edges.extend(pick.iter().map(|&i| (pairs[i].0, pairs[i].1)));
        if connected(k, &edges) {
            trees += 1;
            let w: f64 = pick.iter().map(|&i| pairs[i].2).sum();
            if w < best {
                best = w;
            }
        }
    });
    (best, trees)
}

/// AUROC by counting every positive/negative pair; ties count half.
pub fn pair_count_auroc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut doubled = 0u64;
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                doubled += 2;
            } else if scores[i] == scores[j] {
                doubled += 1;
            }
        }
    }
    doubled as f64 / (2 * pairs) as f64
}

/// Straight transcription of the head-selection pseudocode over a dense
/// `values[sample][head]` table. Returns `(ranked head indices, n_opt,
/// auroc trace, running scores after each step)`.
pub fn pseudocode_selection(
    values: &[Vec<f64>],
    labels: &[u8],
    head_keys: &[(u32, u32)],
    n_max: usize,
) -> (Vec<usize>, usize, Vec<f64>, Vec<Vec<f64>>) {
    let n_heads = head_keys.len();
    let mut delta = vec![0.0; n_heads];
    for h in 0..n_heads {
        let (mut sh, mut nh, mut sg, mut ng) = (0.0, 0.0, 0.0, 0.0);
        for (s, row) in values.iter().enumerate() {
            if labels[s] == 1 {
                sh += row[h];
                nh += 1.0;
            } else {
                sg += row[h];
                ng += 1.0;
            }
        }
        delta[h] = sh / nh - sg / ng;
    }
    let mut order: Vec<usize> = (0..n_heads).collect();
    order.sort_by(|&a, &b| {
        delta[b]
            .partial_cmp(&delta[a])
            .unwrap()
            .then(head_keys[a].cmp(&head_keys[b]))
    });

    let mut n_opt = 1;
    let mut auroc_max = 0.0;
    let mut p = vec![0.0; values.len()];
    let mut trace = Vec::new();
    let mut steps = Vec::new();
    for n in 1..=n_max.min(n_heads) {
        let nf = n as f64;
        for (s, row) in values.iter().enumerate() {
            p[s] = (nf - 1.0) / nf * p[s] + 1.0 / nf * row[order[n - 1]];
        }
        let a = pair_count_auroc(labels, &p);
        trace.push(a);
        steps.push(p.clone());
        if a > auroc_max {
            auroc_max = a;
            n_opt = n;
        }
    }
    (order, n_opt, trace, steps)
}

/// Packed lower-triangular distances drawn uniformly from `[0, 1]`.
pub fn random_graph(rng: &mut impl Rng, n: usize, prompt_len: usize) -> DistanceGraph {
    DistanceGraph::from_fn(n, prompt_len, |_, _| rng.gen::<f64>()).unwrap()
}

/// A graph of random size in `min_n..=max_n` with a random valid split.
pub fn random_sized_graph(rng: &mut impl Rng, min_n: usize, max_n: usize) -> DistanceGraph {
    let n = rng.gen_range(min_n.max(2)..=max_n);
    let p = rng.gen_range(1..n);
    random_graph(rng, n, p)
}
