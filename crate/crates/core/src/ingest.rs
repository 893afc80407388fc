//! Whitespace-separated edge-list ingestion (SNAP style).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::graph::{Dropped, Graph};

#[derive(Clone, Debug)]
pub struct Ingested {
    pub graph: Graph,
    pub dropped: Dropped,
    /// Original id of each compacted node.
    pub original_ids: Vec<u64>,
    pub summary: IngestSummary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub lines: usize,
    pub comment_lines: usize,
    pub pairs_read: usize,
    pub nodes: usize,
    pub edges: usize,
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

/// Reads `#` comments and `u v` rows. Ids are compacted to `0..N` in order
/// of first appearance; repeated pairs (in either direction) and self-loops
/// are dropped and counted. Blank lines are skipped.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut original_ids: Vec<u64> = Vec::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut lines = 0;
    let mut comment_lines = 0;

    let mut intern = |raw: u64, original_ids: &mut Vec<u64>| -> Result<u32> {
        if let Some(&i) = ids.get(&raw) {
            return Ok(i);
        }
        let next = u32::try_from(original_ids.len()).map_err(|_| FgnError::Resource {
            what: "distinct node ids".into(),
            limit: u32::MAX as usize,
        })?;
        ids.insert(raw, next);
        original_ids.push(raw);
        Ok(next)
    };

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| FgnError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            comment_lines += 1;
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(FgnError::Parse {
                    line: line_no,
                    message: format!("expected two node ids, got '{trimmed}'"),
                })
            }
        };
        let parse = |s: &str| {
            s.parse::<u64>().map_err(|_| FgnError::Parse {
                line: line_no,
                message: format!("'{s}' is not a non-negative integer node id"),
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        let u = intern(a, &mut original_ids)?;
        let v = intern(b, &mut original_ids)?;
        pairs.push((u, v));
    }

    let pairs_read = pairs.len();
    let mut seen = HashSet::with_capacity(pairs.len());
    let rows: Vec<(u32, u32)> = pairs
        .iter()
        .copied()
        .filter(|&(u, v)| u != v && seen.insert((u.min(v), u.max(v))))
        .collect();
    drop(seen);
    let (graph, dropped) = Graph::from_pairs(original_ids.len(), pairs)?;
    let graph = graph.with_input_rows(rows);
    let summary = IngestSummary {
        lines,
        comment_lines,
        pairs_read,
        nodes: graph.num_nodes(),
        edges: graph.num_edges(),
        duplicates_dropped: dropped.duplicates,
        self_loops_dropped: dropped.self_loops,
    };
    Ok(Ingested {
        graph,
        dropped,
        original_ids,
        summary,
    })
}

pub fn read_edge_list_file(path: &Path) -> Result<Ingested> {
    let file = File::open(path).map_err(|e| FgnError::io(path, e))?;
    parse_edge_list(BufReader::new(file))
}

/// Node count at or above which dense spectra and clique enumeration are
/// skipped unless explicitly requested.
pub const LARGE_GRAPH_NODES: usize = 500_000;
