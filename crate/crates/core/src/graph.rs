//! Simple undirected graphs in compressed adjacency form.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};

/// Latent coordinates, row-major with `dim` values per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointCloud {
    pub fn empty(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn in_domain(&self) -> bool {
        self.coords.iter().all(|c| (-0.5..=0.5).contains(c))
    }
}

/// Undirected simple graph on nodes `0..N`.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted; the adjacency
/// lists are sorted as well.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    pub positions: Option<PointCloud>,
    pub labels: Option<Vec<u8>>,
    /// `key = value` pairs written into serialized headers.
    pub provenance: Vec<(String, String)>,
    /// Rows to serialize instead of the sorted edges, as read from a file.
    input_rows: Option<Vec<(u32, u32)>>,
}

/// Counts of input pairs discarded while normalising an edge list.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Builds a graph from arbitrary pairs, dropping self-loops and repeated
    /// pairs. Pairs may refer to nodes in either order.
    pub fn from_pairs(num_nodes: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<(Self, Dropped)> {
        let mut dropped = Dropped::default();
        let mut edges = Vec::new();
        for (a, b) in pairs {
            if a as usize >= num_nodes || b as usize >= num_nodes {
                return Err(FgnError::InvalidParameter(format!(
                    "edge ({a}, {b}) refers to a node outside 0..{num_nodes}"
                )));
            }
            if a == b {
                dropped.self_loops += 1;
                continue;
            }
            edges.push(if a < b { (a, b) } else { (b, a) });
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        dropped.duplicates = before - edges.len();
        Ok((Self::from_sorted_unique(num_nodes, edges), dropped))
    }

    /// Same as [`Graph::from_pairs`] but rejects anything that is not already simple.
    pub fn from_edges(num_nodes: usize, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let (g, dropped) = Self::from_pairs(num_nodes, pairs)?;
        if dropped != Dropped::default() {
            return Err(FgnError::InvalidParameter(format!(
                "edge list is not simple: {} duplicates, {} self-loops",
                dropped.duplicates, dropped.self_loops
            )));
        }
        Ok(g)
    }

    pub(crate) fn from_sorted_unique(num_nodes: usize, edges: Vec<(u32, u32)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(edges.iter().all(|&(u, v)| u < v && (v as usize) < num_nodes));
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &edges {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0u32; 2 * edges.len()];
        // Visiting edges in sorted order fills lower neighbours first; the
        // upper neighbours of u arrive in increasing v, so each list ends up
        // sorted without a second pass.
        for &(u, v) in &edges {
            neighbors[fill[v as usize]] = u;
            fill[v as usize] += 1;
        }
        for &(u, v) in &edges {
            neighbors[fill[u as usize]] = v;
            fill[u as usize] += 1;
        }
        Self {
            num_nodes,
            edges,
            offsets,
            neighbors,
            positions: None,
            labels: None,
            provenance: Vec::new(),
            input_rows: None,
        }
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self::from_sorted_unique(num_nodes, Vec::new())
    }

    pub fn complete(num_nodes: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..num_nodes as u32 {
            for v in u + 1..num_nodes as u32 {
                edges.push((u, v));
            }
        }
        Self::from_sorted_unique(num_nodes, edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|v| self.degree(v)).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// Component id per node (numbered by smallest member) and the count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.num_nodes];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.num_nodes {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in self.neighbors(u) {
                    let w = w as usize;
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Hop distances from `source`; unreachable nodes get `u32::MAX`.
    pub fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.num_nodes];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for &w in self.neighbors(u) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Largest finite hop distance over all components.
    pub fn diameter(&self) -> u32 {
        (0..self.num_nodes)
            .map(|s| self.bfs(s).into_iter().filter(|&d| d != u32::MAX).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Keeps the given rows (one per edge, any orientation) as the
    /// serialization order, so re-reading a written file keeps node ids.
    pub(crate) fn with_input_rows(mut self, rows: Vec<(u32, u32)>) -> Self {
        debug_assert_eq!(rows.len(), self.edges.len());
        self.input_rows = Some(rows);
        self
    }

    /// Edge list: provenance as `#` lines, then `u v` rows, sorted unless the
    /// graph was read from a file.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in &self.provenance {
            writeln!(out, "# {k} = {v}")?;
        }
        writeln!(out, "# nodes = {}", self.num_nodes)?;
        writeln!(out, "# edges = {}", self.edges.len())?;
        for &(u, v) in self.input_rows.as_deref().unwrap_or(&self.edges) {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn write_positions_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let Some(p) = &self.positions else {
            return Ok(());
        };
        let mut header = String::from("node_id");
        for k in 0..p.dim {
            header.push_str(&format!(",x{}", k + 1));
        }
        writeln!(out, "{header}")?;
        for i in 0..p.len() {
            let mut line = i.to_string();
            for c in p.point(i) {
                line.push_str(&format!(",{c}"));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn write_labels_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let Some(labels) = &self.labels else {
            return Ok(());
        };
        writeln!(out, "node_id,community")?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(out, "{i},{l}")?;
        }
        Ok(())
    }

    /// Asserts simplicity and index bounds; used by tests and debug builds.
    pub fn check_simple(&self) -> bool {
        self.edges.windows(2).all(|w| w[0] < w[1])
            && self.edges.iter().all(|&(u, v)| u < v && (v as usize) < self.num_nodes)
            && (0..self.num_nodes).all(|v| {
                let nb = self.neighbors(v);
                nb.windows(2).all(|w| w[0] < w[1]) && !nb.contains(&(v as u32))
            })
    }
}
