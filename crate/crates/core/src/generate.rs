//! Fractal Gaussian Network generation: Cox point cloud driven by the chaos
//! measure, then independent edges with a Gaussian (or hard) connection
//! profile. Also the two-community block variant.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::field::{smooth_at_least, FieldGrid, FieldLimits, FieldSampler, GridSpec, Synthesis};
use crate::gmc::{fractality, gmc_from_field, GmcMeasure};
use crate::graph::{Graph, PointCloud};
use crate::kernel::KernelSpec;
use crate::seed::{pair_uniform, Substream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeModel {
    /// Connect with probability `exp(-|x - y|² / σ²)`.
    #[default]
    #[serde(alias = "gaussian")]
    GaussianKernel,
    /// Connect iff `|x - y| <= σ`.
    #[serde(alias = "hard")]
    HardThreshold,
}

impl std::str::FromStr for EdgeModel {
    type Err = FgnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "gaussian_kernel" => Ok(EdgeModel::GaussianKernel),
            "hard" | "hard_threshold" => Ok(EdgeModel::HardThreshold),
            other => Err(FgnError::Config(format!("unknown edge model '{other}' (expected gaussian or hard)"))),
        }
    }
}

impl std::fmt::Display for EdgeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeModel::GaussianKernel => "gaussian_kernel",
            EdgeModel::HardThreshold => "hard_threshold",
        })
    }
}

/// Connection radius making the expected degree approach `ρ`:
/// `σ = π^{-1/2} ρ^{1/d} n^{-1/d}`.
pub fn sigma_for(n: f64, rho: f64, dim: usize) -> f64 {
    let d = dim as f64;
    PI.powf(-0.5) * rho.powf(1.0 / d) * n.powf(-1.0 / d)
}

#[inline]
pub fn edge_prob(x: &[f64], y: &[f64], sigma: f64, model: EdgeModel) -> f64 {
    prob_from_sq(sq_dist(x, y), sigma * sigma, model)
}

#[inline]
fn prob_from_sq(d2: f64, sigma2: f64, model: EdgeModel) -> f64 {
    match model {
        EdgeModel::GaussianKernel => (-d2 / sigma2).exp(),
        EdgeModel::HardThreshold => {
            if d2 <= sigma2 {
                1.0
            } else {
                0.0
            }
        }
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FgnParams {
    pub n: f64,
    pub rho: f64,
    pub gamma: f64,
    pub dim: usize,
    #[serde(default)]
    pub edge_model: EdgeModel,
    #[serde(default)]
    pub seed: u64,
}

impl FgnParams {
    pub fn new(n: f64, rho: f64, gamma: f64, dim: usize) -> Self {
        Self {
            n,
            rho,
            gamma,
            dim,
            edge_model: EdgeModel::GaussianKernel,
            seed: 0,
        }
    }

    /// Parameters with `γ = sqrt(ν d)`.
    pub fn with_nu(n: f64, rho: f64, nu: f64, dim: usize) -> Result<Self> {
        Ok(Self::new(n, rho, crate::gmc::gamma_for_nu(nu, dim)?, dim))
    }

    pub fn sigma(&self) -> f64 {
        sigma_for(self.n, self.rho, self.dim)
    }

    pub fn nu(&self) -> f64 {
        self.gamma * self.gamma / self.dim as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(FgnError::InvalidParameter(format!("size parameter n must be >= 1, got {}", self.n)));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(FgnError::InvalidParameter(format!("density rho must be > 0, got {}", self.rho)));
        }
        fractality(self.gamma, self.dim)?;
        Ok(())
    }
}

/// Knobs that do not change the model, only how it is simulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenOptions {
    pub kernel: KernelSpec,
    /// Cells per side of the field grid; default from [`default_cells_per_side`].
    pub cells_per_side: Option<usize>,
    /// Field truncation; default `ln(cells_per_side)`.
    pub truncation: Option<f64>,
    pub synthesis: Synthesis,
    pub field_limits: FieldLimits,
    /// Generation fails with a resource error above this many nodes.
    pub max_nodes: usize,
    /// Largest node count handled by the all-pairs loop.
    pub exact_pair_limit: usize,
    /// Cell-list cutoff radius in units of σ.
    pub cutoff_factor: f64,
    pub keep_positions: bool,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Triangular,
            cells_per_side: None,
            truncation: None,
            synthesis: Synthesis::Auto,
            field_limits: FieldLimits::default(),
            max_nodes: 5_000_000,
            exact_pair_limit: 20_000,
            cutoff_factor: 4.0,
            keep_positions: true,
        }
    }
}

/// Minimum grid cells per connection radius.
pub const CELLS_PER_SIGMA: f64 = 4.0;

/// `ceil(4/σ)` cells per side, reduced to fit the field synthesis limits.
/// The flag is true when the limit forced a coarser grid.
pub fn default_cells_per_side(sigma: f64, dim: usize, limits: &FieldLimits) -> (usize, bool) {
    let want = (CELLS_PER_SIGMA / sigma).ceil().max(1.0) as usize;
    let fits = |m: usize| {
        let dense_ok = (m as f64).powi(dim as i32) <= limits.dense_max_cells as f64;
        let circ_ok = (smooth_at_least(2 * m) as f64).powi(dim as i32) <= limits.circulant_max_points as f64;
        dense_ok || circ_ok
    };
    if fits(want) {
        return (want, false);
    }
    let mut m = want;
    while m > 1 && !fits(m) {
        m = if m > 64 { m * 15 / 16 } else { m - 1 };
    }
    (m.max(1), true)
}

/// Cox point cloud: `N ~ Poisson(n M(Ω))`, then i.i.d. points drawn from the
/// normalised measure (cell by mass, uniform inside the cell).
pub fn sample_nodes(measure: &GmcMeasure, n: f64, seed: u64) -> PointCloud {
    let mut rng = Substream::Nodes.rng(seed);
    let count = poisson_count(n * measure.total_mass, &mut rng);
    place_nodes(measure, count, &mut rng)
}

fn poisson_count(lambda: f64, rng: &mut ChaCha8Rng) -> usize {
    if lambda > 0.0 {
        Poisson::new(lambda).map(|p| p.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    }
}

/// Draws the node count and fails before placing anything if it exceeds
/// the cap.
fn sample_nodes_capped(measure: &GmcMeasure, n: f64, seed: u64, stream: Substream, opts: &GenOptions) -> Result<PointCloud> {
    let mut rng = stream.rng(seed);
    let count = poisson_count(n * measure.total_mass, &mut rng);
    check_node_cap(count, opts)?;
    Ok(place_nodes(measure, count, &mut rng))
}

fn place_nodes(measure: &GmcMeasure, count: usize, rng: &mut ChaCha8Rng) -> PointCloud {
    let dim = measure.grid.dim;
    let h = measure.grid.h();
    let single = measure.cell_masses.len() == 1;
    let mut cumulative = Vec::with_capacity(measure.cell_masses.len());
    let mut acc = 0.0;
    for &m in &measure.cell_masses {
        acc += m;
        cumulative.push(acc);
    }
    let mut coords = Vec::with_capacity(count * dim);
    let mut origin = vec![0.0; dim];
    for _ in 0..count {
        let cell = if single {
            0
        } else {
            let u = rng.random::<f64>() * acc;
            cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
        };
        measure.grid.cell_origin(cell, &mut origin);
        for &o in &origin {
            let x: f64 = o + h * rng.random::<f64>();
            coords.push(x.clamp(-0.5, 0.5));
        }
    }
    PointCloud { dim, coords }
}

/// Connection rule for one pair, given both endpoints' indices.
trait PairRule: Sync {
    fn prob(&self, i: usize, j: usize, d2: f64) -> f64;
    /// Radius beyond which pairs may be skipped by the cell list.
    fn reach(&self) -> f64;
}

struct Homogeneous {
    sigma2: f64,
    sigma: f64,
    model: EdgeModel,
}

impl PairRule for Homogeneous {
    #[inline]
    fn prob(&self, _: usize, _: usize, d2: f64) -> f64 {
        prob_from_sq(d2, self.sigma2, self.model)
    }
    fn reach(&self) -> f64 {
        self.sigma
    }
}

struct TwoCommunity<'a> {
    labels: &'a [u8],
    in2: f64,
    out2: f64,
    reach: f64,
    model: EdgeModel,
}

impl PairRule for TwoCommunity<'_> {
    #[inline]
    fn prob(&self, i: usize, j: usize, d2: f64) -> f64 {
        let s2 = if self.labels[i] == self.labels[j] { self.in2 } else { self.out2 };
        prob_from_sq(d2, s2, self.model)
    }
    fn reach(&self) -> f64 {
        self.reach
    }
}

#[inline]
fn accept<R: PairRule>(rule: &R, coin_seed: u64, i: usize, j: usize, d2: f64) -> bool {
    let p = rule.prob(i, j, d2);
    p >= 1.0 || (p > 0.0 && pair_uniform(coin_seed, i as u32, j as u32) < p)
}

/// Which pair loop produced the edges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLoop {
    Exact,
    CellList,
}

fn wire_exact<R: PairRule>(points: &PointCloud, rule: &R, coin_seed: u64) -> Vec<(u32, u32)> {
    let n = points.len();
    let rows: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = points.point(i);
            let mut row = Vec::new();
            for j in i + 1..n {
                if accept(rule, coin_seed, i, j, sq_dist(xi, points.point(j))) {
                    row.push((i as u32, j as u32));
                }
            }
            row
        })
        .collect();
    rows.concat()
}

/// Uniform cell list over Ω with side `cutoff · reach`. Returns `None` when
/// the grid would have fewer than three cells per side or a stencil too
/// large to be worth it.
fn wire_cell_list<R: PairRule>(points: &PointCloud, rule: &R, coin_seed: u64, cutoff: f64) -> Option<Vec<(u32, u32)>> {
    let dim = points.dim;
    let side = cutoff * rule.reach();
    let per_side = (1.0 / side).floor() as usize;
    if per_side < 3 || dim > 6 {
        return None;
    }
    let total_cells = (per_side as f64).powi(dim as i32);
    if total_cells > 1e8 {
        return None;
    }
    let total_cells = total_cells as usize;
    let cell_of = |x: &[f64]| -> usize {
        x.iter().fold(0usize, |acc, &c| {
            let k = (((c + 0.5) * per_side as f64) as usize).min(per_side - 1);
            acc * per_side + k
        })
    };
    let n = points.len();
    let cells: Vec<usize> = (0..n).map(|i| cell_of(points.point(i))).collect();
    let mut start = vec![0usize; total_cells + 1];
    for &c in &cells {
        start[c + 1] += 1;
    }
    for c in 0..total_cells {
        start[c + 1] += start[c];
    }
    let mut members = vec![0u32; n];
    let mut fill = start.clone();
    for (i, &c) in cells.iter().enumerate() {
        members[fill[c]] = i as u32;
        fill[c] += 1;
    }
    let stencil: Vec<Vec<isize>> = (0..3usize.pow(dim as u32))
        .map(|mut code| {
            (0..dim)
                .map(|_| {
                    let o = (code % 3) as isize - 1;
                    code /= 3;
                    o
                })
                .collect()
        })
        .collect();

    let rows: Vec<Vec<(u32, u32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = points.point(i);
            let mut home = vec![0isize; dim];
            let mut rest = cells[i];
            for slot in home.iter_mut().rev() {
                *slot = (rest % per_side) as isize;
                rest /= per_side;
            }
            let mut row = Vec::new();
            'offsets: for off in &stencil {
                let mut c = 0usize;
                for (h, o) in home.iter().zip(off) {
                    let k = h + o;
                    if k < 0 || k >= per_side as isize {
                        continue 'offsets;
                    }
                    c = c * per_side + k as usize;
                }
                for &j in &members[start[c]..start[c + 1]] {
                    let j = j as usize;
                    if j > i && accept(rule, coin_seed, i, j, sq_dist(xi, points.point(j))) {
                        row.push((i as u32, j as u32));
                    }
                }
            }
            row.sort_unstable();
            row
        })
        .collect();
    Some(rows.concat())
}

fn wire<R: PairRule>(points: &PointCloud, rule: &R, coin_seed: u64, opts: &GenOptions) -> (Vec<(u32, u32)>, PairLoop) {
    if points.len() > opts.exact_pair_limit {
        if let Some(edges) = wire_cell_list(points, rule, coin_seed, opts.cutoff_factor) {
            return (edges, PairLoop::CellList);
        }
    }
    (wire_exact(points, rule, coin_seed), PairLoop::Exact)
}

/// Edges among given points with the homogeneous rule; exposed so the two
/// pair loops can be compared directly.
pub fn wire_edges(points: &PointCloud, sigma: f64, model: EdgeModel, coin_seed: u64, pair_loop: PairLoop, cutoff: f64) -> Result<Vec<(u32, u32)>> {
    let rule = Homogeneous {
        sigma2: sigma * sigma,
        sigma,
        model,
    };
    match pair_loop {
        PairLoop::Exact => Ok(wire_exact(points, &rule, coin_seed)),
        PairLoop::CellList => wire_cell_list(points, &rule, coin_seed, cutoff).ok_or_else(|| {
            FgnError::InvalidParameter("cell list needs at least three cells per side".into())
        }),
    }
}

/// One generated network together with the realised measure mass.
#[derive(Clone, Debug)]
pub struct Realization {
    pub graph: Graph,
    pub total_mass: f64,
    pub pair_loop: PairLoop,
}

/// Builds the field factorisation once and generates replicates from it.
pub struct FgnGenerator {
    params: FgnParams,
    opts: GenOptions,
    sampler: FieldSampler,
    sigma: f64,
}

impl FgnGenerator {
    pub fn new(params: FgnParams, opts: GenOptions) -> Result<Self> {
        params.validate()?;
        opts.kernel.validate()?;
        let sigma = params.sigma();
        let grid = field_grid(params.gamma, &[sigma], params.dim, &opts)?;
        let sampler = FieldSampler::new(grid, &opts.kernel, opts.synthesis, opts.field_limits)?;
        Ok(Self { params, opts, sampler, sigma })
    }

    pub fn params(&self) -> &FgnParams {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn grid(&self) -> &GridSpec {
        self.sampler.grid()
    }

    pub fn measure(&self, seed: u64) -> Result<(FieldGrid, GmcMeasure)> {
        let field = self.sampler.sample(seed);
        let m = gmc_from_field(&field, self.params.gamma)?;
        Ok((field, m))
    }

    /// Full replicate for a seed: field, nodes, edges.
    pub fn generate(&self, seed: u64) -> Result<Realization> {
        let (_, measure) = self.measure(seed)?;
        self.generate_on(&measure, seed)
    }

    /// Nodes and edges over a given measure (the field stream is unused).
    pub fn generate_on(&self, measure: &GmcMeasure, seed: u64) -> Result<Realization> {
        let points = sample_nodes_capped(measure, self.params.n, seed, Substream::Nodes, &self.opts)?;
        let rule = Homogeneous {
            sigma2: self.sigma * self.sigma,
            sigma: self.sigma,
            model: self.params.edge_model,
        };
        let (edges, pair_loop) = wire(&points, &rule, Substream::EdgeCoin.seed(seed), &self.opts);
        let mut graph = Graph::from_sorted_unique(points.len(), edges);
        graph.provenance = vec![
            ("model".into(), "fgn".into()),
            ("n".into(), self.params.n.to_string()),
            ("rho".into(), self.params.rho.to_string()),
            ("gamma".into(), self.params.gamma.to_string()),
            ("nu".into(), self.params.nu().to_string()),
            ("dim".into(), self.params.dim.to_string()),
            ("edge_model".into(), self.params.edge_model.to_string()),
            ("sigma".into(), self.sigma.to_string()),
            ("cells_per_side".into(), measure.grid.cells_per_side.to_string()),
            ("truncation".into(), measure.grid.t.to_string()),
            ("seed".into(), seed.to_string()),
        ];
        if self.opts.keep_positions {
            graph.positions = Some(points);
        }
        Ok(Realization {
            graph,
            total_mass: measure.total_mass,
            pair_loop,
        })
    }
}

fn check_node_cap(count: usize, opts: &GenOptions) -> Result<()> {
    if count > opts.max_nodes || count > u32::MAX as usize {
        return Err(FgnError::Resource {
            what: format!("{count} sampled nodes"),
            limit: opts.max_nodes.min(u32::MAX as usize),
        });
    }
    Ok(())
}

/// Grid for the field: a single cell when the measure is Lebesgue anyway,
/// otherwise the configured or default resolution.
fn field_grid(gamma: f64, sigmas: &[f64], dim: usize, opts: &GenOptions) -> Result<GridSpec> {
    if gamma == 0.0 {
        return GridSpec::new(dim, opts.cells_per_side.unwrap_or(1), 0.0);
    }
    let sigma = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    let m = match opts.cells_per_side {
        Some(m) => m,
        None => {
            let (m, capped) = default_cells_per_side(sigma, dim, &opts.field_limits);
            if capped {
                log::warn!(
                    "field grid capped at {m} cells per side in d = {dim}; fewer than {CELLS_PER_SIGMA} cells per connection radius"
                );
            }
            m
        }
    };
    let t = opts.truncation.unwrap_or((m as f64).ln());
    GridSpec::new(dim, m, t)
}

/// Single-shot generation with default options, using `params.seed`.
pub fn generate_graph(params: &FgnParams) -> Result<Graph> {
    Ok(FgnGenerator::new(params.clone(), GenOptions::default())?.generate(params.seed)?.graph)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma_in: f64,
    pub sigma_out: f64,
    pub n: f64,
    pub dim: usize,
    #[serde(default)]
    pub edge_model: EdgeModel,
    #[serde(default)]
    pub seed: u64,
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return Err(FgnError::InvalidParameter(format!("size parameter n must be >= 1, got {}", self.n)));
        }
        for (name, s) in [("sigma_in", self.sigma_in), ("sigma_out", self.sigma_out)] {
            if !(s > 0.0) || !s.is_finite() {
                return Err(FgnError::InvalidParameter(format!("{name} must be > 0, got {s}")));
            }
        }
        fractality(self.gamma1, self.dim)?;
        fractality(self.gamma2, self.dim)?;
        Ok(())
    }
}

/// Two-community model on one box: independent measures per community,
/// intra pairs use `σ_in`, inter pairs `σ_out`. Community 0 nodes come first.
pub struct SbmGenerator {
    params: SbmParams,
    opts: GenOptions,
    samplers: [FieldSampler; 2],
}

impl SbmGenerator {
    pub fn new(params: SbmParams, opts: GenOptions) -> Result<Self> {
        params.validate()?;
        opts.kernel.validate()?;
        let sigmas = [params.sigma_in, params.sigma_out];
        let mk = |gamma: f64| -> Result<FieldSampler> {
            let grid = field_grid(gamma, &sigmas, params.dim, &opts)?;
            FieldSampler::new(grid, &opts.kernel, opts.synthesis, opts.field_limits)
        };
        let samplers = [mk(params.gamma1)?, mk(params.gamma2)?];
        Ok(Self { params, opts, samplers })
    }

    pub fn generate(&self, seed: u64) -> Result<Realization> {
        let m1 = gmc_from_field(&self.samplers[0].sample_substream(seed, Substream::Field), self.params.gamma1)?;
        let m2 = gmc_from_field(&self.samplers[1].sample_substream(seed, Substream::FieldSecond), self.params.gamma2)?;
        let p1 = sample_nodes_capped(&m1, self.params.n, seed, Substream::Nodes, &self.opts)?;
        let p2 = sample_nodes_capped(&m2, self.params.n, seed, Substream::NodesSecond, &self.opts)?;
        check_node_cap(p1.len() + p2.len(), &self.opts)?;
        let mut labels = vec![0u8; p1.len()];
        labels.resize(p1.len() + p2.len(), 1);
        let mut coords = p1.coords;
        coords.extend_from_slice(&p2.coords);
        let points = PointCloud { dim: self.params.dim, coords };
        let rule = TwoCommunity {
            labels: &labels,
            in2: self.params.sigma_in * self.params.sigma_in,
            out2: self.params.sigma_out * self.params.sigma_out,
            reach: self.params.sigma_in.max(self.params.sigma_out),
            model: self.params.edge_model,
        };
        let (edges, pair_loop) = wire(&points, &rule, Substream::EdgeCoin.seed(seed), &self.opts);
        let mut graph = Graph::from_sorted_unique(points.len(), edges);
        graph.provenance = vec![
            ("model".into(), "sbm".into()),
            ("n".into(), self.params.n.to_string()),
            ("gamma1".into(), self.params.gamma1.to_string()),
            ("gamma2".into(), self.params.gamma2.to_string()),
            ("sigma_in".into(), self.params.sigma_in.to_string()),
            ("sigma_out".into(), self.params.sigma_out.to_string()),
            ("dim".into(), self.params.dim.to_string()),
            ("edge_model".into(), self.params.edge_model.to_string()),
            ("seed".into(), seed.to_string()),
        ];
        graph.labels = Some(labels);
        if self.opts.keep_positions {
            graph.positions = Some(points);
        }
        Ok(Realization {
            graph,
            total_mass: m1.total_mass + m2.total_mass,
            pair_loop,
        })
    }
}

pub fn generate_sbm(params: &SbmParams) -> Result<Graph> {
    Ok(SbmGenerator::new(params.clone(), GenOptions::default())?.generate(params.seed)?.graph)
}
