//! Laplacian and adjacency spectra, eigenvalue multiplicity clusters and
//! scree data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Laplacian,
    Adjacency,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Largest graph handed to the dense solver.
    pub max_nodes: usize,
    /// Cluster gap, relative to `max(1, |λ|_max)`.
    pub relative_tol: f64,
    /// A cluster is a peak when its size is at least this fraction of N.
    pub peak_fraction: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            max_nodes: 6000,
            relative_tol: 1e-9,
            peak_fraction: 0.005,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub value: f64,
    pub count: usize,
    pub is_peak: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub kind: MatrixKind,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// `(rank, |λ|)`, largest magnitude first, ranks from 1.
    pub scree: Vec<(usize, f64)>,
    pub components: usize,
    pub tolerance: f64,
}

impl SpectrumReport {
    /// Size of the cluster containing 0, if any.
    pub fn zero_multiplicity(&self) -> usize {
        self.clusters
            .iter()
            .find(|c| c.value.abs() <= self.tolerance.max(1e-8))
            .map_or(0, |c| c.count)
    }

    pub fn largest_cluster(&self) -> usize {
        self.clusters.iter().map(|c| c.count).max().unwrap_or(0)
    }
}

pub fn spectrum(g: &Graph, kind: MatrixKind) -> Result<SpectrumReport> {
    spectrum_with(g, kind, &SpectrumOptions::default())
}

/// Dense eigendecomposition, one block per connected component.
pub fn spectrum_with(g: &Graph, kind: MatrixKind, opts: &SpectrumOptions) -> Result<SpectrumReport> {
    let n = g.num_nodes();
    if n > opts.max_nodes {
        return Err(FgnError::Resource {
            what: format!("dense eigensolve of a {n}-node graph; subsample or raise the cap"),
            limit: opts.max_nodes,
        });
    }
    let (comp, count) = g.components();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (v, &c) in comp.iter().enumerate() {
        members[c].push(v);
    }
    let mut local = vec![0usize; n];
    let mut eigenvalues = Vec::with_capacity(n);
    for nodes in &members {
        if nodes.len() == 1 {
            eigenvalues.push(0.0);
            continue;
        }
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let k = nodes.len();
        let mut m = DMatrix::<f64>::zeros(k, k);
        for (i, &v) in nodes.iter().enumerate() {
            for &w in g.neighbors(v) {
                m[(i, local[w as usize])] = -1.0;
            }
            if kind == MatrixKind::Laplacian {
                m[(i, i)] = g.degree(v) as f64;
            }
        }
        if kind == MatrixKind::Adjacency {
            m.neg_mut();
        }
        eigenvalues.extend(m.symmetric_eigenvalues().iter().copied());
    }
    eigenvalues.sort_by(f64::total_cmp);

    let max_abs = eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let tolerance = opts.relative_tol * max_abs.max(1.0);
    let peak_min = ((opts.peak_fraction * n as f64).ceil() as usize).max(2);
    let clusters = multiplicity_profile(&eigenvalues, tolerance, peak_min);

    let mut mags: Vec<f64> = eigenvalues.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let scree = mags.into_iter().enumerate().map(|(i, m)| (i + 1, m)).collect();

    Ok(SpectrumReport {
        kind,
        eigenvalues,
        clusters,
        scree,
        components: count,
        tolerance,
    })
}

/// Single-linkage grouping of consecutive sorted values whose gap is at
/// most `tol`. Representative value is the cluster mean.
pub fn multiplicity_profile(sorted: &[f64], tol: f64, peak_min: usize) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] - sorted[i - 1] > tol {
            if i > start {
                let group = &sorted[start..i];
                let count = group.len();
                out.push(Cluster {
                    value: group.iter().sum::<f64>() / count as f64,
                    count,
                    is_peak: count >= peak_min,
                });
            }
            start = i;
        }
    }
    out
}
