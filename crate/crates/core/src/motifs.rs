//! Exact subgraph tallies: edges, triangles, k-spokes, k-cliques, degree
//! histogram and clustering coefficients.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::graph::Graph;

/// Default cap on recursion steps in clique enumeration.
pub const DEFAULT_CLIQUE_BUDGET: u64 = 2_000_000_000;

pub fn count_edges(g: &Graph) -> u64 {
    g.num_edges() as u64
}

/// Neighbours of `u` with a larger index.
fn upper(g: &Graph, u: usize) -> &[u32] {
    let nb = g.neighbors(u);
    &nb[nb.partition_point(|&w| (w as usize) <= u)..]
}

fn intersect_count(a: &[u32], b: &[u32]) -> u64 {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Graphs at least this dense (mean degree) with at most
/// [`BITSET_MAX_NODES`] nodes are counted with adjacency bitsets.
const BITSET_MIN_MEAN_DEGREE: f64 = 64.0;
const BITSET_MAX_NODES: usize = 1 << 15;

fn use_bitsets(g: &Graph) -> bool {
    let n = g.num_nodes();
    n > 0 && n <= BITSET_MAX_NODES && 2.0 * g.num_edges() as f64 / n as f64 >= BITSET_MIN_MEAN_DEGREE
}

/// One bit row per node.
struct BitRows {
    words: usize,
    bits: Vec<u64>,
}

impl BitRows {
    fn new<'a>(n: usize, row: impl Fn(usize) -> &'a [u32]) -> Self {
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for v in 0..n {
            let r = &mut bits[v * words..(v + 1) * words];
            for &w in row(v) {
                r[w as usize / 64] |= 1 << (w % 64);
            }
        }
        Self { words, bits }
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.bits[v * self.words..(v + 1) * self.words]
    }
}

fn and_count(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| u64::from((x & y).count_ones())).sum()
}

/// Each triangle `u < v < w` is found once, from `u` through `v`.
pub fn count_triangles(g: &Graph) -> u64 {
    if use_bitsets(g) {
        let rows = BitRows::new(g.num_nodes(), |v| g.neighbors(v));
        return (0..g.num_nodes())
            .into_par_iter()
            .map(|u| {
                upper(g, u)
                    .iter()
                    .map(|&v| {
                        // common neighbours w > v
                        let v = v as usize;
                        let first = (v + 1) / 64;
                        let (a, b) = (&rows.row(u)[first..], &rows.row(v)[first..]);
                        let Some((&a0, a_rest)) = a.split_first() else { return 0 };
                        let mask = if (v + 1).is_multiple_of(64) { !0 } else { !0u64 << ((v + 1) % 64) };
                        u64::from((a0 & b[0] & mask).count_ones()) + and_count(a_rest, &b[1..])
                    })
                    .sum::<u64>()
            })
            .sum();
    }
    (0..g.num_nodes())
        .into_par_iter()
        .map(|u| {
            let up = upper(g, u);
            up.iter()
                .enumerate()
                .map(|(pos, &v)| intersect_count(&up[pos + 1..], upper(g, v as usize)))
                .sum::<u64>()
        })
        .sum()
}

pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// `Σ_v C(deg v, k)`: unordered k-subsets of each hub's neighbourhood.
pub fn count_k_spokes(g: &Graph, k: usize) -> Result<u128> {
    if k == 0 {
        return Err(FgnError::InvalidParameter("spoke size k must be >= 1".into()));
    }
    Ok((0..g.num_nodes()).map(|v| binomial(g.degree(v) as u64, k as u64)).sum())
}

/// Degeneracy order (repeatedly remove a minimum-degree node); returns the
/// rank of each node.
fn degeneracy_rank(g: &Graph) -> Vec<usize> {
    let n = g.num_nodes();
    let mut deg: Vec<usize> = g.degrees();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); max_deg + 1];
    for v in 0..n {
        buckets[deg[v]].push(v);
    }
    let mut removed = vec![false; n];
    let mut rank = vec![0; n];
    let mut next = 0;
    let mut d = 0;
    while next < n {
        // degrees only drop by one at a time, so restarting one bucket lower suffices
        let v = loop {
            match buckets[d].pop() {
                Some(v) if !removed[v] && deg[v] == d => break v,
                Some(_) => continue,
                None => d += 1,
            }
        };
        removed[v] = true;
        rank[v] = next;
        next += 1;
        for &w in g.neighbors(v) {
            let w = w as usize;
            if !removed[w] {
                deg[w] -= 1;
                buckets[deg[w]].push(w);
            }
        }
        d = d.saturating_sub(1);
    }
    rank
}

/// Exact k-clique count by enumeration over the degeneracy-oriented graph.
pub fn count_k_cliques(g: &Graph, k: usize) -> Result<u64> {
    count_k_cliques_with_budget(g, k, DEFAULT_CLIQUE_BUDGET)
}

pub fn count_k_cliques_with_budget(g: &Graph, k: usize, budget: u64) -> Result<u64> {
    match k {
        0 => return Err(FgnError::InvalidParameter("clique size k must be >= 1".into())),
        1 => return Ok(g.num_nodes() as u64),
        2 => return Ok(g.num_edges() as u64),
        _ => {}
    }
    let rank = degeneracy_rank(g);
    // out-neighbours in the orientation low rank -> high rank, sorted by id
    let out: Vec<Vec<u32>> = (0..g.num_nodes())
        .map(|v| g.neighbors(v).iter().copied().filter(|&w| rank[w as usize] > rank[v]).collect())
        .collect();
    let exhausted = || FgnError::Resource {
        what: format!("{k}-clique enumeration steps"),
        limit: budget as usize,
    };
    let mut steps = 0u64;
    let mut total = 0u64;
    if use_bitsets(g) {
        let rows = BitRows::new(g.num_nodes(), |v| &out[v]);
        for v in 0..g.num_nodes() {
            if out[v].len() + 1 < k {
                continue;
            }
            total += extend_bits(&rows, &out, rows.row(v), k - 1, &mut steps, budget).ok_or_else(exhausted)?;
        }
        return Ok(total);
    }
    for v in 0..g.num_nodes() {
        if out[v].len() + 1 < k {
            continue;
        }
        total += extend_lists(&out, &out[v], k - 1, &mut steps, budget).ok_or_else(exhausted)?;
    }
    Ok(total)
}

/// Cliques of `depth` more nodes inside the sorted candidate list.
fn extend_lists(out: &[Vec<u32>], cand: &[u32], depth: usize, steps: &mut u64, budget: u64) -> Option<u64> {
    *steps += 1;
    if *steps > budget {
        return None;
    }
    if depth == 1 {
        return Some(cand.len() as u64);
    }
    let mut total = 0;
    if depth == 2 {
        for &v in cand {
            total += intersect_count(cand, &out[v as usize]);
        }
        return Some(total);
    }
    let mut next = Vec::new();
    for &v in cand {
        next.clear();
        let ov = &out[v as usize];
        let (mut i, mut j) = (0, 0);
        while i < cand.len() && j < ov.len() {
            match cand[i].cmp(&ov[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    next.push(cand[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        if next.len() + 1 >= depth {
            total += extend_lists(out, &next, depth - 1, steps, budget)?;
        }
    }
    Some(total)
}

/// As [`extend_lists`] with the candidates as a bit row.
fn extend_bits(rows: &BitRows, out: &[Vec<u32>], cand: &[u64], depth: usize, steps: &mut u64, budget: u64) -> Option<u64> {
    *steps += 1;
    if *steps > budget {
        return None;
    }
    if depth == 1 {
        return Some(cand.iter().map(|w| u64::from(w.count_ones())).sum());
    }
    let mut total = 0;
    let mut next = vec![0u64; cand.len()];
    for (wi, &word) in cand.iter().enumerate() {
        let mut word = word;
        while word != 0 {
            let v = wi * 64 + word.trailing_zeros() as usize;
            word &= word - 1;
            if out[v].len() + 1 < depth {
                continue;
            }
            if depth == 2 {
                total += and_count(cand, rows.row(v));
                continue;
            }
            for ((n, c), r) in next.iter_mut().zip(cand).zip(rows.row(v)) {
                *n = c & r;
            }
            total += extend_bits(rows, out, &next, depth - 1, steps, budget)?;
        }
    }
    Some(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub per_node: Vec<f64>,
    pub average: f64,
    /// Set when the graph has no nodes and the average is the 0 convention.
    pub empty_graph: bool,
}

/// Local coefficients `C_i = 2 e_i / (k_i (k_i - 1))`, with `C_i = 0` for
/// `k_i < 2`, and their plain average over all nodes.
pub fn clustering(g: &Graph) -> Clustering {
    let n = g.num_nodes();
    let dense = use_bitsets(g).then(|| BitRows::new(n, |v| g.neighbors(v)));
    let per_node: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|v| {
            let nb = g.neighbors(v);
            let k = nb.len();
            if k < 2 {
                return 0.0;
            }
            let links: u64 = match &dense {
                Some(rows) => nb.iter().map(|&w| and_count(rows.row(v), rows.row(w as usize))).sum::<u64>() / 2,
                None => nb.iter().map(|&w| intersect_count(nb, upper(g, w as usize))).sum(),
            };
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect();
    let average = if n == 0 { 0.0 } else { per_node.iter().sum::<f64>() / n as f64 };
    Clustering {
        per_node,
        average,
        empty_graph: n == 0,
    }
}

/// Degree -> node count, degree 0 included.
pub fn degree_histogram(g: &Graph) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for v in 0..g.num_nodes() {
        *h.entry(g.degree(v)).or_insert(0) += 1;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifCounts {
    pub nodes: usize,
    pub edges: u64,
    pub triangles: u64,
    pub spokes: BTreeMap<usize, u128>,
    pub cliques: BTreeMap<usize, u64>,
    pub degree_hist: BTreeMap<usize, usize>,
    pub clustering_avg: f64,
    #[serde(skip)]
    pub clustering_per_node: Vec<f64>,
}

/// All counters at once. `spoke_ks` and `clique_ks` select which k to tally.
pub fn motif_counts(g: &Graph, spoke_ks: &[usize], clique_ks: &[usize]) -> Result<MotifCounts> {
    let mut spokes = BTreeMap::new();
    for &k in spoke_ks {
        spokes.insert(k, count_k_spokes(g, k)?);
    }
    let triangles = count_triangles(g);
    let mut cliques = BTreeMap::new();
    for &k in clique_ks {
        let c = if k == 3 { triangles } else { count_k_cliques(g, k)? };
        cliques.insert(k, c);
    }
    let cl = clustering(g);
    Ok(MotifCounts {
        nodes: g.num_nodes(),
        edges: count_edges(g),
        triangles,
        spokes,
        cliques,
        degree_hist: degree_histogram(g),
        clustering_avg: cl.average,
        clustering_per_node: cl.per_node,
    })
}
