//! Batch runner: configuration, seeded replicates, per-mode statistics and
//! file output with a hashed manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{FgnError, Result};
use crate::fractal::fractal_dimension;
use crate::generate::{sigma_for, EdgeModel, FgnGenerator, FgnParams, GenOptions, SbmGenerator, SbmParams};
use crate::gmc::gamma_for_nu;
use crate::graph::Graph;
use crate::inference::{
    detect_fractality, detect_fractality_multi, estimate_nu_multi, estimate_nu_single, fit_scaling_exponent,
    predicted_edge_count, predicted_triangle_count, Aggregator, CountKind, ScalingBatch,
};
use crate::ingest::{read_edge_list_file, LARGE_GRAPH_NODES};
use crate::motifs::{count_k_cliques, count_k_spokes, count_triangles, clustering, degree_histogram};
use crate::seed::replicate_seed;
use crate::spectral::{spectrum_with, MatrixKind, SpectrumOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Generate,
    Stats,
    Spectrum,
    Boxdim,
    Estimate,
    Detect,
    Sbm,
    Ingest,
    Scaling,
}

impl std::str::FromStr for Mode {
    type Err = FgnError;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| FgnError::Config(format!("unknown mode '{s}'")))
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| std::fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

/// Single-network model; exactly one of `gamma` and `nu` may be set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n: f64,
    pub rho: f64,
    pub gamma: Option<f64>,
    pub nu: Option<f64>,
    pub dim: usize,
    pub edge_model: EdgeModel,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n: 1000.0,
            rho: 1.0,
            gamma: None,
            nu: None,
            dim: 2,
            edge_model: EdgeModel::GaussianKernel,
        }
    }
}

impl ModelConfig {
    pub fn gamma(&self) -> Result<f64> {
        match (self.gamma, self.nu) {
            (Some(_), Some(_)) => Err(FgnError::Config("set either gamma or nu, not both".into())),
            (Some(g), None) => Ok(g),
            (None, Some(nu)) => gamma_for_nu(nu, self.dim),
            (None, None) => Ok(0.0),
        }
    }

    pub fn params_at(&self, n: f64) -> Result<FgnParams> {
        let mut p = FgnParams::new(n, self.rho, self.gamma()?, self.dim);
        p.edge_model = self.edge_model;
        p.validate()?;
        Ok(p)
    }
}

/// Two-community model. Missing radii default to `sigma_for(2n, rho, d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma_in: Option<f64>,
    pub sigma_out: Option<f64>,
    pub rho: f64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            gamma1: 0.0,
            gamma2: 0.0,
            sigma_in: None,
            sigma_out: None,
            rho: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub model: ModelConfig,
    pub sbm: SbmConfig,
    /// Size parameters for scaling runs.
    pub n_grid: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub aggregator: Aggregator,
    /// Counts fitted in scaling runs.
    pub count_kinds: Vec<CountKind>,
    pub spoke_ks: Vec<usize>,
    pub clique_ks: Vec<usize>,
    pub nu0: f64,
    /// Edge list to analyse instead of generated networks.
    pub input: Option<PathBuf>,
    pub emit_positions: bool,
    pub emit_labels: bool,
    pub matrix: MatrixKind,
    pub spectrum: SpectrumOptions,
    pub box_sizes: Option<Vec<usize>>,
    pub generation: GenOptions,
    /// Run dense spectra and clique enumeration on very large inputs.
    pub allow_large: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Generate,
            model: ModelConfig::default(),
            sbm: SbmConfig::default(),
            n_grid: vec![500.0, 1000.0, 2000.0, 4000.0],
            replicates: 1,
            master_seed: 0,
            output_dir: PathBuf::from("fgn-out"),
            aggregator: Aggregator::Median,
            count_kinds: vec![CountKind::Edges, CountKind::Triangles],
            spoke_ks: vec![2],
            clique_ks: vec![],
            nu0: 0.3,
            input: None,
            emit_positions: false,
            emit_labels: true,
            matrix: MatrixKind::Laplacian,
            spectrum: SpectrumOptions::default(),
            box_sizes: None,
            generation: GenOptions {
                keep_positions: false,
                ..GenOptions::default()
            },
            allow_large: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FgnError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| FgnError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(FgnError::Config("replicates must be >= 1".into()));
        }
        let needs_input = matches!(self.mode, Mode::Ingest);
        if needs_input && self.input.is_none() {
            return Err(FgnError::Config(format!("mode {} needs an input edge list", self.mode)));
        }
        if self.mode == Mode::Scaling {
            let mut ns = self.n_grid.clone();
            ns.sort_by(f64::total_cmp);
            ns.dedup();
            if ns.len() < 3 {
                return Err(FgnError::Config("scaling needs at least 3 distinct n values".into()));
            }
            if self.count_kinds.is_empty() {
                return Err(FgnError::Config("scaling needs at least one count kind".into()));
            }
        }
        if self.mode == Mode::Detect && !(self.nu0 > 0.0) {
            return Err(FgnError::Config(format!("nu0 must be > 0, got {}", self.nu0)));
        }
        if self.spoke_ks.contains(&0) || self.clique_ks.contains(&0) {
            return Err(FgnError::Config("motif sizes must be >= 1".into()));
        }
        if self.mode == Mode::Sbm {
            self.sbm_params()?.validate()?;
        } else if self.input.is_none() || self.mode == Mode::Scaling {
            self.model.params_at(self.model.n)?;
        }
        Ok(())
    }

    pub fn sbm_params(&self) -> Result<SbmParams> {
        let dim = self.model.dim;
        let n = self.model.n;
        let default_sigma = sigma_for(2.0 * n, self.sbm.rho, dim);
        Ok(SbmParams {
            gamma1: self.sbm.gamma1,
            gamma2: self.sbm.gamma2,
            sigma_in: self.sbm.sigma_in.unwrap_or(default_sigma),
            sigma_out: self.sbm.sigma_out.unwrap_or(default_sigma),
            n,
            dim,
            edge_model: self.model.edge_model,
            seed: self.master_seed,
        })
    }

    /// Generation options; positions are kept when they are to be written.
    pub fn gen_options(&self) -> GenOptions {
        let mut g = self.generation.clone();
        g.keep_positions |= self.emit_positions;
        g
    }

    fn spoke_ks_for_kinds(&self) -> Vec<usize> {
        let mut ks = self.spoke_ks.clone();
        for kind in &self.count_kinds {
            if let CountKind::Spokes(k) = kind {
                ks.push(*k);
            }
        }
        ks.sort_unstable();
        ks.dedup();
        ks
    }

    fn clique_ks_for_kinds(&self) -> Vec<usize> {
        let mut ks = self.clique_ks.clone();
        for kind in &self.count_kinds {
            if let CountKind::Cliques(k) = kind {
                ks.push(*k);
            }
        }
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

/// Statistics of one replicate (or of one ingested graph).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate_id: u64,
    pub n: f64,
    pub seed: u64,
    pub nodes: u64,
    pub edges: u64,
    pub triangles: u64,
    pub spokes: BTreeMap<usize, u128>,
    pub cliques: BTreeMap<usize, u64>,
    pub clustering_avg: f64,
    pub total_mass: Option<f64>,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

impl ReplicateRecord {
    fn failed(replicate_id: u64, n: f64, seed: u64, err: &FgnError, wall_time_ms: f64) -> Self {
        Self {
            replicate_id,
            n,
            seed,
            nodes: 0,
            edges: 0,
            triangles: 0,
            spokes: BTreeMap::new(),
            cliques: BTreeMap::new(),
            clustering_avg: 0.0,
            total_mass: None,
            wall_time_ms,
            error: Some(err.to_string()),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn count(&self, kind: CountKind) -> Option<f64> {
        match kind {
            CountKind::Edges => Some(self.edges as f64),
            CountKind::Triangles => Some(self.triangles as f64),
            CountKind::Spokes(k) => self.spokes.get(&k).map(|&c| c as f64),
            CountKind::Cliques(k) => match k {
                1 => Some(self.nodes as f64),
                2 => Some(self.edges as f64),
                3 => Some(self.triangles as f64),
                _ => self.cliques.get(&k).map(|&c| c as f64),
            },
        }
    }
}

/// Motif statistics of a graph as a record.
pub fn graph_record(g: &Graph, spoke_ks: &[usize], clique_ks: &[usize]) -> Result<ReplicateRecord> {
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
    Ok(ReplicateRecord {
        replicate_id: 0,
        n: 0.0,
        seed: 0,
        nodes: g.num_nodes() as u64,
        edges: g.num_edges() as u64,
        triangles,
        spokes,
        cliques,
        clustering_avg: clustering(g).average,
        total_mass: None,
        wall_time_ms: 0.0,
        error: None,
    })
}

/// Stable 64-bit key of a size parameter for seed derivation.
pub fn size_key(n: f64) -> u64 {
    if n.fract() == 0.0 && (0.0..9.0e15).contains(&n) {
        n as u64
    } else {
        n.to_bits()
    }
}

/// Named edge list to be written, with its optional sidecars.
#[derive(Clone, Debug)]
pub struct NamedGraph {
    pub name: String,
    pub graph: Graph,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub contents: String,
}

/// Everything a run produces, ready for [`write_outputs`].
#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub mode: Mode,
    pub records: Vec<ReplicateRecord>,
    pub spoke_ks: Vec<usize>,
    pub clique_ks: Vec<usize>,
    pub graphs: Vec<NamedGraph>,
    pub tables: Vec<Table>,
    pub summary: Value,
    pub emit_positions: bool,
    pub emit_labels: bool,
}

impl RunArtifacts {
    pub fn empty(mode: Mode) -> Self {
        Self {
            mode,
            records: Vec::new(),
            spoke_ks: Vec::new(),
            clique_ks: Vec::new(),
            graphs: Vec::new(),
            tables: Vec::new(),
            summary: json!({ "mode": mode }),
            emit_positions: false,
            emit_labels: true,
        }
    }
}

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

enum Source<'a> {
    Fgn(&'a FgnGenerator),
    Sbm(&'a SbmGenerator),
}

/// Generates `m` replicates at one size parameter. Replicates run in
/// parallel; output order is by replicate id.
fn run_replicates(
    source: Source<'_>,
    n: f64,
    cfg: &ExperimentConfig,
    keep_graphs: bool,
) -> (Vec<ReplicateRecord>, Vec<Option<Graph>>) {
    let spoke_ks = cfg.spoke_ks_for_kinds();
    let clique_ks = cfg.clique_ks_for_kinds();
    let results: Vec<(ReplicateRecord, Option<Graph>)> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let seed = replicate_seed(cfg.master_seed, size_key(n), rep);
            let start = Instant::now();
            let outcome = match source {
                Source::Fgn(g) => g.generate(seed),
                Source::Sbm(g) => g.generate(seed),
            }
            .and_then(|real| {
                let mut rec = graph_record(&real.graph, &spoke_ks, &clique_ks)?;
                rec.total_mass = Some(real.total_mass);
                Ok((rec, real.graph))
            });
            let ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok((mut rec, graph)) => {
                    rec.replicate_id = rep;
                    rec.n = n;
                    rec.seed = seed;
                    rec.wall_time_ms = ms;
                    (rec, keep_graphs.then_some(graph))
                }
                Err(e) => {
                    log::warn!("replicate {rep} at n = {n} failed: {e}");
                    (ReplicateRecord::failed(rep, n, seed, &e, ms), None)
                }
            }
        })
        .collect();
    results.into_iter().unzip()
}

fn check_failures(records: &[ReplicateRecord], first_error: impl FnOnce() -> Option<FgnError>) -> Result<()> {
    let failed = records.iter().filter(|r| !r.ok()).count();
    if failed as f64 > MAX_FAILURE_FRACTION * records.len() as f64 {
        let err = first_error().unwrap_or_else(|| {
            FgnError::Numerical(format!("{failed} of {} replicates failed", records.len()))
        });
        log::error!("{failed} of {} replicates failed", records.len());
        return Err(err);
    }
    Ok(())
}

/// Re-raises the first replicate failure with its original error kind.
fn replay_first_failure(cfg: &ExperimentConfig, records: &[ReplicateRecord], n: f64, sbm: bool) -> Option<FgnError> {
    let rec = records.iter().find(|r| !r.ok())?;
    let res = if sbm {
        cfg.sbm_params()
            .and_then(|p| SbmGenerator::new(p, cfg.gen_options()))
            .and_then(|g| g.generate(rec.seed).map(|_| ()))
    } else {
        cfg.model
            .params_at(n)
            .and_then(|p| FgnGenerator::new(p, cfg.gen_options()))
            .and_then(|g| g.generate(rec.seed).map(|_| ()))
    };
    res.err()
}

fn fmt_f(x: f64) -> String {
    format!("{x}")
}

/// Loads the configured input, or generates the configured replicates.
fn source_graphs(cfg: &ExperimentConfig) -> Result<(Vec<ReplicateRecord>, Vec<NamedGraph>, Option<Value>)> {
    let spoke_ks = cfg.spoke_ks_for_kinds();
    if let Some(path) = &cfg.input {
        let ing = read_edge_list_file(path)?;
        let large = ing.graph.num_nodes() >= LARGE_GRAPH_NODES;
        let clique_ks: Vec<usize> = if large && !cfg.allow_large {
            let skipped: Vec<usize> = cfg.clique_ks_for_kinds().into_iter().filter(|&k| k > 3).collect();
            if !skipped.is_empty() {
                log::warn!("skipping exact clique counts {skipped:?} on a {}-node input", ing.graph.num_nodes());
            }
            cfg.clique_ks_for_kinds().into_iter().filter(|&k| k <= 3).collect()
        } else {
            cfg.clique_ks_for_kinds()
        };
        let mut rec = graph_record(&ing.graph, &spoke_ks, &clique_ks)?;
        rec.n = ing.graph.num_nodes() as f64;
        let info = serde_json::to_value(&ing.summary).map_err(|e| FgnError::Numerical(e.to_string()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input".into());
        return Ok((vec![rec], vec![NamedGraph { name, graph: ing.graph }], Some(info)));
    }
    let n = cfg.model.n;
    let gen = FgnGenerator::new(cfg.model.params_at(n)?, cfg.gen_options())?;
    let (records, graphs) = run_replicates(Source::Fgn(&gen), n, cfg, true);
    check_failures(&records, || replay_first_failure(cfg, &records, n, false))?;
    let named = records
        .iter()
        .zip(graphs)
        .filter_map(|(r, g)| {
            g.map(|graph| NamedGraph {
                name: format!("graph_n{}_r{}", fmt_f(r.n), r.replicate_id),
                graph,
            })
        })
        .collect();
    Ok((records, named, None))
}

/// Runs the configured mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let mut out = RunArtifacts::empty(cfg.mode);
    out.spoke_ks = cfg.spoke_ks_for_kinds();
    out.clique_ks = cfg.clique_ks_for_kinds();
    out.emit_positions = cfg.emit_positions;
    out.emit_labels = cfg.emit_labels;
    let mut summary = serde_json::Map::new();
    summary.insert("mode".into(), json!(cfg.mode));
    summary.insert("master_seed".into(), json!(cfg.master_seed));

    match cfg.mode {
        Mode::Generate => {
            let (records, graphs, _) = source_graphs(&ExperimentConfig {
                input: None,
                ..cfg.clone()
            })?;
            summary.insert("params".into(), json!(FgnParams { seed: cfg.master_seed, ..cfg.model.params_at(cfg.model.n)? }));
            summary.insert("replicates".into(), json!(records.len()));
            out.records = records;
            out.graphs = graphs;
        }
        Mode::Sbm => {
            let params = cfg.sbm_params()?;
            let gen = SbmGenerator::new(params.clone(), cfg.gen_options())?;
            let (records, graphs) = run_replicates(Source::Sbm(&gen), params.n, cfg, true);
            check_failures(&records, || replay_first_failure(cfg, &records, params.n, true))?;
            summary.insert("params".into(), json!(params));
            out.graphs = records
                .iter()
                .zip(graphs)
                .filter_map(|(r, g)| {
                    g.map(|graph| NamedGraph {
                        name: format!("sbm_n{}_r{}", fmt_f(r.n), r.replicate_id),
                        graph,
                    })
                })
                .collect();
            out.records = records;
        }
        Mode::Ingest => {
            let (records, graphs, info) = source_graphs(cfg)?;
            summary.insert("ingest".into(), info.unwrap_or(Value::Null));
            out.records = records;
            out.graphs = graphs;
        }
        Mode::Stats => {
            let (records, graphs, info) = source_graphs(cfg)?;
            if let Some(info) = info {
                summary.insert("ingest".into(), info);
            }
            for (rec, ng) in records.iter().zip(&graphs) {
                let mut csv = String::from("degree,count\n");
                for (d, c) in degree_histogram(&ng.graph) {
                    let _ = writeln!(csv, "{d},{c}");
                }
                out.tables.push(Table {
                    name: format!("degree_hist_r{}.csv", rec.replicate_id),
                    contents: csv,
                });
            }
            out.records = records;
        }
        Mode::Spectrum => {
            let (records, graphs, _) = source_graphs(cfg)?;
            let mut reports = Vec::new();
            for (rec, ng) in records.iter().zip(&graphs) {
                if ng.graph.num_nodes() >= LARGE_GRAPH_NODES && !cfg.allow_large {
                    return Err(FgnError::Resource {
                        what: format!(
                            "dense spectrum of a {}-node graph (pass allow_large to override)",
                            ng.graph.num_nodes()
                        ),
                        limit: LARGE_GRAPH_NODES,
                    });
                }
                let rep = spectrum_with(&ng.graph, cfg.matrix, &cfg.spectrum)?;
                let id = rec.replicate_id;
                let mut eig = String::from("index,eigenvalue\n");
                for (i, v) in rep.eigenvalues.iter().enumerate() {
                    let _ = writeln!(eig, "{i},{v}");
                }
                let mut cl = String::from("value,count,is_peak\n");
                for c in &rep.clusters {
                    let _ = writeln!(cl, "{},{},{}", c.value, c.count, c.is_peak);
                }
                let mut scree = String::from("rank,magnitude\n");
                for (r, m) in &rep.scree {
                    let _ = writeln!(scree, "{r},{m}");
                }
                out.tables.push(Table { name: format!("spectrum_r{id}.csv"), contents: eig });
                out.tables.push(Table { name: format!("clusters_r{id}.csv"), contents: cl });
                out.tables.push(Table { name: format!("scree_r{id}.csv"), contents: scree });
                reports.push(json!({
                    "replicate_id": id,
                    "matrix": rep.kind,
                    "nodes": ng.graph.num_nodes(),
                    "components": rep.components,
                    "zero_multiplicity": rep.zero_multiplicity(),
                    "largest_cluster": rep.largest_cluster(),
                    "peaks": rep.clusters.iter().filter(|c| c.is_peak).count(),
                    "tolerance": rep.tolerance,
                }));
            }
            summary.insert("spectra".into(), Value::Array(reports));
            out.records = records;
        }
        Mode::Boxdim => {
            let (records, graphs, _) = source_graphs(cfg)?;
            let mut fits = Vec::new();
            for (rec, ng) in records.iter().zip(&graphs) {
                let r = fractal_dimension(&ng.graph, cfg.box_sizes.as_deref())?;
                let mut csv = String::from("l_b,n_b\n");
                for (l, c) in r.l_values.iter().zip(&r.n_boxes) {
                    let _ = writeln!(csv, "{l},{c}");
                }
                out.tables.push(Table {
                    name: format!("boxdim_r{}.csv", rec.replicate_id),
                    contents: csv,
                });
                fits.push(json!({
                    "replicate_id": rec.replicate_id,
                    "d_b": r.d_b,
                    "fit_range": r.fit_range,
                    "residual": r.residual,
                    "degenerate": r.degenerate,
                    "warning": r.warning,
                }));
            }
            summary.insert("box_dimension".into(), Value::Array(fits));
            out.records = records;
        }
        Mode::Estimate => {
            let (records, _, info) = source_graphs(cfg)?;
            let ok: Vec<(u64, u64)> = records.iter().filter(|r| r.ok()).map(|r| (r.edges, r.nodes)).collect();
            if cfg.input.is_some() {
                let est = estimate_nu_single(ok[0].0, ok[0].1)?;
                summary.insert("estimate".into(), json!(est));
                summary.insert(
                    "note".into(),
                    json!("single-pass estimate ln E / ln N - 1 on the graph as ingested: undirected, duplicates and self-loops removed, all components kept"),
                );
                summary.insert("ingest".into(), info.unwrap_or(Value::Null));
            } else {
                let est = estimate_nu_multi(&ok)?;
                let singles: Vec<Value> = ok
                    .iter()
                    .map(|&(e, n)| estimate_nu_single(e, n).map(|r| json!(r.nu_hat)).unwrap_or(Value::Null))
                    .collect();
                summary.insert("estimate".into(), json!(est));
                summary.insert("single_pass".into(), Value::Array(singles));
                summary.insert("true_nu".into(), json!(cfg.model.params_at(cfg.model.n)?.nu()));
            }
            out.records = records;
        }
        Mode::Detect => {
            let (records, _, _) = source_graphs(cfg)?;
            let ok: Vec<(u64, u64)> = records.iter().filter(|r| r.ok()).map(|r| (r.edges, r.nodes)).collect();
            let per: Vec<Value> = ok
                .iter()
                .map(|&(e, n)| detect_fractality(e, n, cfg.nu0).map(|d| json!(d)).unwrap_or(Value::Null))
                .collect();
            let declared = per.iter().filter(|d| d["declared_fractal"] == json!(true)).count();
            summary.insert("per_network".into(), Value::Array(per));
            summary.insert("declared_fraction".into(), json!(declared as f64 / ok.len().max(1) as f64));
            if ok.len() > 1 {
                summary.insert("multi_pass".into(), json!(detect_fractality_multi(&ok, cfg.nu0)?));
            }
            out.records = records;
        }
        Mode::Scaling => {
            let mut all = Vec::new();
            let mut ns = cfg.n_grid.clone();
            ns.sort_by(f64::total_cmp);
            ns.dedup();
            for &n in &ns {
                let gen = FgnGenerator::new(cfg.model.params_at(n)?, cfg.gen_options())?;
                let (records, _) = run_replicates(Source::Fgn(&gen), n, cfg, false);
                check_failures(&records, || replay_first_failure(cfg, &records, n, false))?;
                all.extend(records);
            }
            let gamma = cfg.model.gamma()?;
            let mut fits = Vec::new();
            for &kind in &cfg.count_kinds {
                let batches: Vec<ScalingBatch> = ns
                    .iter()
                    .map(|&n| ScalingBatch {
                        n,
                        samples: all
                            .iter()
                            .filter(|r| r.n == n && r.ok())
                            .filter_map(|r| r.count(kind).map(|c| (r.nodes, c)))
                            .collect(),
                    })
                    .collect();
                let fit = fit_scaling_exponent(&batches, kind, cfg.aggregator)?;
                let mut csv = String::from("n,mean_n,aggregated_count,predicted_count\n");
                for p in &fit.points {
                    let predicted = match kind {
                        CountKind::Edges => predicted_edge_count(gamma, cfg.model.dim, cfg.model.rho, p.n).ok(),
                        CountKind::Triangles | CountKind::Cliques(3) => {
                            predicted_triangle_count(gamma, cfg.model.dim, cfg.model.rho, p.n).ok()
                        }
                        _ => None,
                    };
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        p.n,
                        p.mean_nodes,
                        p.count,
                        predicted.map(fmt_f).unwrap_or_default()
                    );
                }
                out.tables.push(Table {
                    name: format!("scaling_{kind}.csv"),
                    contents: csv,
                });
                fits.push(json!({
                    "count_kind": kind.to_string(),
                    "slope": fit.slope,
                    "intercept": fit.intercept,
                    "aggregator": fit.aggregator,
                    "points": fit.points,
                }));
            }
            summary.insert("params".into(), json!(FgnParams { seed: cfg.master_seed, ..cfg.model.params_at(ns[0])? }));
            summary.insert("fits".into(), Value::Array(fits));
            out.records = all;
        }
    }
    let failed = out.records.iter().filter(|r| !r.ok()).count();
    summary.insert("records".into(), json!(out.records.len()));
    summary.insert("failed_replicates".into(), json!(failed));
    out.summary = Value::Object(summary);
    Ok(out)
}

/// Records as CSV. Columns follow the configured spoke and clique sizes;
/// `wall_time_ms` is last and is the only non-reproducible column.
pub fn records_csv(records: &[ReplicateRecord], spoke_ks: &[usize], clique_ks: &[usize]) -> String {
    let mut s = String::from("replicate_id,n,seed,nodes,edges,triangles");
    for k in spoke_ks {
        let _ = write!(s, ",spokes_{k}");
    }
    for k in clique_ks {
        let _ = write!(s, ",cliques_{k}");
    }
    s.push_str(",clustering_avg,total_mass,error,wall_time_ms\n");
    for r in records {
        let _ = write!(s, "{},{},{},{},{},{}", r.replicate_id, r.n, r.seed, r.nodes, r.edges, r.triangles);
        for k in spoke_ks {
            let _ = write!(s, ",{}", r.spokes.get(k).map(|c| c.to_string()).unwrap_or_default());
        }
        for k in clique_ks {
            let _ = write!(s, ",{}", r.cliques.get(k).map(|c| c.to_string()).unwrap_or_default());
        }
        let err = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let mass = r.total_mass.map(fmt_f).unwrap_or_default();
        let _ = writeln!(s, ",{},{},{},{:.3}", r.clustering_avg, mass, err, r.wall_time_ms);
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
    pub summary: ManifestEntry,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<ManifestEntry> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| FgnError::io(&path, e))?;
    Ok(ManifestEntry {
        path: name.to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Writes every artifact under `dir`, then `summary.json` and
/// `manifest.json` (which lists the other files with their SHA-256).
pub fn write_outputs(art: &RunArtifacts, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| FgnError::io(dir, e))?;
    let mut files = Vec::new();
    if !art.records.is_empty() {
        let csv = records_csv(&art.records, &art.spoke_ks, &art.clique_ks);
        files.push(write_file(dir, "records.csv", csv.as_bytes())?);
    }
    for ng in &art.graphs {
        let mut buf = Vec::new();
        ng.graph.write_edge_list(&mut buf).map_err(|e| FgnError::io(dir, e))?;
        files.push(write_file(dir, &format!("{}.edges", ng.name), &buf)?);
        if art.emit_positions && ng.graph.positions.is_some() {
            let mut buf = Vec::new();
            ng.graph.write_positions_csv(&mut buf).map_err(|e| FgnError::io(dir, e))?;
            files.push(write_file(dir, &format!("{}.positions.csv", ng.name), &buf)?);
        }
        if art.emit_labels && ng.graph.labels.is_some() {
            let mut buf = Vec::new();
            ng.graph.write_labels_csv(&mut buf).map_err(|e| FgnError::io(dir, e))?;
            files.push(write_file(dir, &format!("{}.labels.csv", ng.name), &buf)?);
        }
    }
    for t in &art.tables {
        files.push(write_file(dir, &t.name, t.contents.as_bytes())?);
    }
    let summary_text = serde_json::to_string_pretty(&art.summary).map_err(|e| FgnError::Numerical(e.to_string()))?;
    let summary = write_file(dir, "summary.json", summary_text.as_bytes())?;
    let manifest = Manifest { files, summary };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| FgnError::Numerical(e.to_string()))?;
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(|e| FgnError::io(&path, e))?;
    Ok(manifest)
}
