//! Exact simulation of the truncated field `X_t` on a regular grid over
//! `[-1/2, 1/2]^d`.
//!
//! Two synthesis routes produce the same Gaussian law:
//!
//! * dense: lower Cholesky factor of the full cell-centre covariance matrix,
//! * circulant: the covariance is embedded in a periodic grid of side
//!   `M >= 2m` and diagonalised by the FFT. The top-left `m^d` block of the
//!   embedding is exactly the cell-centre covariance, so the draw is exact
//!   whenever the embedding spectrum is non-negative.
//!
//! Factorisations depend only on the grid and kernel, so a [`FieldSampler`]
//! is built once and reused across seeds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::kernel::KernelSpec;
use crate::seed::Substream;

/// Regular grid of `cells_per_side^dim` cubic cells over the unit box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub cells_per_side: usize,
    /// Truncation level; every cell value has variance `t`.
    pub t: f64,
}

impl GridSpec {
    pub fn new(dim: usize, cells_per_side: usize, t: f64) -> Result<Self> {
        if dim == 0 {
            return Err(FgnError::InvalidParameter("dimension must be >= 1".into()));
        }
        if cells_per_side == 0 {
            return Err(FgnError::InvalidParameter("need at least one cell per side".into()));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(FgnError::InvalidParameter(format!("truncation t must be finite and >= 0, got {t}")));
        }
        if (cells_per_side as f64).powi(dim as i32) > u32::MAX as f64 {
            return Err(FgnError::Resource {
                what: format!("grid with {cells_per_side}^{dim} cells"),
                limit: u32::MAX as usize,
            });
        }
        Ok(Self { dim, cells_per_side, t })
    }

    /// Grid with spacing `h`; `1/h` must be an integer.
    pub fn with_spacing(dim: usize, h: f64, t: f64) -> Result<Self> {
        let inv = 1.0 / h;
        let m = inv.round();
        if !(h > 0.0) || m < 1.0 || (inv - m).abs() > 1e-9 * m.max(1.0) {
            return Err(FgnError::InvalidParameter(format!(
                "grid spacing h = {h} must satisfy 1/h integer"
            )));
        }
        Self::new(dim, m as usize, t)
    }

    /// Default truncation `e^t = 1/h`.
    pub fn with_default_truncation(dim: usize, cells_per_side: usize) -> Result<Self> {
        Self::new(dim, cells_per_side, (cells_per_side as f64).ln())
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side.pow(self.dim as u32)
    }

    /// Per-axis integer coordinates of a cell; the last axis varies fastest.
    pub fn cell_coords(&self, mut index: usize) -> Vec<usize> {
        let m = self.cells_per_side;
        let mut out = vec![0; self.dim];
        for slot in out.iter_mut().rev() {
            *slot = index % m;
            index /= m;
        }
        out
    }

    pub fn cell_center(&self, index: usize) -> Vec<f64> {
        let h = self.h();
        self.cell_coords(index)
            .into_iter()
            .map(|c| -0.5 + (c as f64 + 0.5) * h)
            .collect()
    }

    /// Lower corner of a cell.
    pub fn cell_origin(&self, index: usize, out: &mut [f64]) {
        let m = self.cells_per_side;
        let h = self.h();
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = -0.5 + (rest % m) as f64 * h;
            rest /= m;
        }
    }
}

/// One realisation of `X_t` at the cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Synthesis {
    /// Dense for small grids, circulant otherwise, dense as fallback when
    /// the embedding is not non-negative definite.
    #[default]
    Auto,
    Dense,
    Circulant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLimits {
    /// Largest grid factorised densely.
    pub dense_max_cells: usize,
    /// Largest periodic embedding, in grid points.
    pub circulant_max_points: usize,
    /// Grids up to this size use the dense route under [`Synthesis::Auto`].
    pub auto_dense_below: usize,
}

impl Default for FieldLimits {
    fn default() -> Self {
        Self {
            dense_max_cells: 4096,
            circulant_max_points: 1 << 22,
            auto_dense_below: 1024,
        }
    }
}

/// Largest diagonal jitter, relative to `t`, used to restore definiteness.
pub const MAX_RELATIVE_JITTER: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Zero,
    Dense,
    Circulant,
}

enum Route {
    Zero,
    Dense { lower: DMatrix<f64> },
    Circulant(Circulant),
}

struct Circulant {
    side: usize,
    sqrt_eigs: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

/// Reusable sampler for a fixed grid and kernel.
pub struct FieldSampler {
    grid: GridSpec,
    route: Route,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSampler")
            .field("grid", &self.grid)
            .field("kind", &self.kind())
            .finish()
    }
}

impl FieldSampler {
    pub fn new(grid: GridSpec, kernel: &KernelSpec, synthesis: Synthesis, limits: FieldLimits) -> Result<Self> {
        if grid.t == 0.0 {
            return Ok(Self { grid, route: Route::Zero });
        }
        let cells = grid.num_cells();
        let route = match synthesis {
            Synthesis::Dense => dense_route(&grid, kernel, limits)?,
            Synthesis::Circulant => Route::Circulant(circulant_route(&grid, kernel, limits)?),
            Synthesis::Auto => {
                if cells <= limits.auto_dense_below {
                    dense_route(&grid, kernel, limits)?
                } else {
                    match circulant_route(&grid, kernel, limits) {
                        Ok(c) => Route::Circulant(c),
                        Err(err) if cells <= limits.dense_max_cells => {
                            log::debug!("circulant embedding unavailable ({err}); using dense factorisation");
                            dense_route(&grid, kernel, limits)?
                        }
                        Err(err) => return Err(err),
                    }
                }
            }
        };
        Ok(Self { grid, route })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> SamplerKind {
        match self.route {
            Route::Zero => SamplerKind::Zero,
            Route::Dense { .. } => SamplerKind::Dense,
            Route::Circulant(_) => SamplerKind::Circulant,
        }
    }

    /// Draws the field for a replicate seed, using its `field` substream.
    pub fn sample(&self, seed: u64) -> FieldGrid {
        self.sample_substream(seed, Substream::Field)
    }

    pub fn sample_substream(&self, seed: u64, stream: Substream) -> FieldGrid {
        let mut rng = stream.rng(seed);
        let values = match &self.route {
            Route::Zero => vec![0.0; self.grid.num_cells()],
            Route::Dense { lower } => {
                let n = lower.nrows();
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                (lower * z).iter().copied().collect()
            }
            Route::Circulant(c) => c.sample(&self.grid, &mut rng),
        };
        FieldGrid {
            grid: self.grid.clone(),
            values,
            seed,
        }
    }
}

/// Convenience wrapper: builds a sampler with default limits and draws once.
pub fn sample_field(dim: usize, h: f64, t: f64, kernel: &KernelSpec, seed: u64) -> Result<FieldGrid> {
    let grid = GridSpec::with_spacing(dim, h, t)?;
    Ok(FieldSampler::new(grid, kernel, Synthesis::Auto, FieldLimits::default())?.sample(seed))
}

/// Dense covariance matrix between cell centres.
pub fn covariance_matrix(grid: &GridSpec, kernel: &KernelSpec) -> DMatrix<f64> {
    let n = grid.num_cells();
    let centers: Vec<Vec<f64>> = (0..n).map(|i| grid.cell_center(i)).collect();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = grid.t;
        for j in 0..i {
            let r = dist(&centers[i], &centers[j]);
            let c = kernel.covariance(r, grid.t);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    cov
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn dense_route(grid: &GridSpec, kernel: &KernelSpec, limits: FieldLimits) -> Result<Route> {
    let cells = grid.num_cells();
    if cells > limits.dense_max_cells {
        return Err(FgnError::Resource {
            what: format!("dense field factorisation of {cells} cells"),
            limit: limits.dense_max_cells,
        });
    }
    let cov = covariance_matrix(grid, kernel);
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(Route::Dense { lower: ch.l() });
    }
    for rel in [1e-14, 1e-12, MAX_RELATIVE_JITTER] {
        let mut jittered = cov.clone();
        for i in 0..cells {
            jittered[(i, i)] += rel * grid.t;
        }
        if let Some(ch) = jittered.cholesky() {
            log::debug!("covariance needed diagonal jitter {rel:e}·t");
            return Ok(Route::Dense { lower: ch.l() });
        }
    }
    Err(FgnError::Numerical(format!(
        "covariance matrix of {cells} cells is not positive semi-definite after jitter {MAX_RELATIVE_JITTER:e}·t"
    )))
}

/// Smallest 2^a 3^b 5^c that is >= n.
pub(crate) fn smooth_at_least(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut k = m;
        for p in [2, 3, 5] {
            while k.is_multiple_of(p) {
                k /= p;
            }
        }
        if k == 1 {
            return m;
        }
        m += 1;
    }
}

fn circulant_route(grid: &GridSpec, kernel: &KernelSpec, limits: FieldLimits) -> Result<Circulant> {
    let m = grid.cells_per_side;
    let side = smooth_at_least(2 * m);
    let points = (side as f64).powi(grid.dim as i32);
    if points > limits.circulant_max_points as f64 {
        return Err(FgnError::Resource {
            what: format!("circulant embedding with {side}^{} points", grid.dim),
            limit: limits.circulant_max_points,
        });
    }
    let total = side.pow(grid.dim as u32);
    let h = grid.h();

    let mut base = vec![Complex64::new(0.0, 0.0); total];
    let mut coords = vec![0usize; grid.dim];
    for (idx, slot) in base.iter_mut().enumerate() {
        let mut rest = idx;
        for c in coords.iter_mut().rev() {
            *c = rest % side;
            rest /= side;
        }
        let r2: f64 = coords
            .iter()
            .map(|&c| {
                let k = c.min(side - c) as f64 * h;
                k * k
            })
            .sum();
        *slot = Complex64::new(kernel.covariance(r2.sqrt(), grid.t), 0.0);
    }

    let fft = FftPlanner::new().plan_fft_forward(side);
    fft_nd(&mut base, side, grid.dim, fft.as_ref());

    let max_eig = base.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let min_eig = base.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if min_eig < -1e-9 * max_eig.abs().max(1.0) {
        return Err(FgnError::Numerical(format!(
            "circulant embedding has a negative eigenvalue {min_eig:.3e}"
        )));
    }
    let scale = 1.0 / total as f64;
    let sqrt_eigs = base.iter().map(|z| (z.re.max(0.0) * scale).sqrt()).collect();
    Ok(Circulant { side, sqrt_eigs, fft })
}

/// In-place unnormalised d-dimensional FFT over a row-major cube of the
/// given side.
fn fft_nd(data: &mut [Complex64], side: usize, dim: usize, fft: &dyn Fft<f64>) {
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = data.len();
    for axis in 0..dim {
        let stride = side.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(side) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * side;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
}

impl Circulant {
    fn sample<R: Rng>(&self, grid: &GridSpec, rng: &mut R) -> Vec<f64> {
        let mut buf: Vec<Complex64> = self
            .sqrt_eigs
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(s * re, s * im)
            })
            .collect();
        fft_nd(&mut buf, self.side, grid.dim, self.fft.as_ref());

        let m = grid.cells_per_side;
        let mut out = Vec::with_capacity(grid.num_cells());
        let mut coords = vec![0usize; grid.dim];
        for cell in 0..grid.num_cells() {
            let mut rest = cell;
            for c in coords.iter_mut().rev() {
                *c = rest % m;
                rest /= m;
            }
            let idx = coords.iter().fold(0usize, |acc, &c| acc * self.side + c);
            out.push(buf[idx].re);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_geometry() {
        let g = GridSpec::new(2, 4, 1.0).unwrap();
        assert_eq!(g.num_cells(), 16);
        assert_eq!(g.cell_coords(6), vec![1, 2]);
        assert_eq!(g.cell_center(0), vec![-0.375, -0.375]);
        assert_eq!(g.cell_center(15), vec![0.375, 0.375]);
        let mut o = [0.0; 2];
        g.cell_origin(6, &mut o);
        assert_eq!(o, [-0.25, 0.0]);
        assert!(GridSpec::with_spacing(2, 0.3, 1.0).is_err());
        assert_eq!(GridSpec::with_spacing(2, 1.0 / 32.0, 1.0).unwrap().cells_per_side, 32);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_at_least(898), 900);
        assert_eq!(smooth_at_least(64), 64);
        assert_eq!(smooth_at_least(7), 8);
    }

    #[test]
    fn zero_truncation_gives_zero_field() {
        let f = sample_field(2, 0.25, 0.0, &KernelSpec::Triangular, 9).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_cell_is_a_scaled_normal() {
        let grid = GridSpec::new(1, 1, 1.0).unwrap();
        let s = FieldSampler::new(grid, &KernelSpec::Triangular, Synthesis::Auto, FieldLimits::default()).unwrap();
        let draws: Vec<f64> = (0..4000).map(|seed| s.sample(seed).values[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(mean.abs() < 0.06, "{mean}");
        assert!((var - 1.0).abs() < 0.08, "{var}");
    }

    #[test]
    fn deterministic_given_seed() {
        let a = sample_field(2, 1.0 / 16.0, 16f64.ln(), &KernelSpec::Triangular, 5).unwrap();
        let b = sample_field(2, 1.0 / 16.0, 16f64.ln(), &KernelSpec::Triangular, 5).unwrap();
        let c = sample_field(2, 1.0 / 16.0, 16f64.ln(), &KernelSpec::Triangular, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn oversized_dense_request_is_a_resource_error() {
        let grid = GridSpec::new(2, 100, 1.0).unwrap();
        let err = FieldSampler::new(grid, &KernelSpec::Triangular, Synthesis::Dense, FieldLimits::default()).unwrap_err();
        assert!(matches!(err, FgnError::Resource { limit: 4096, .. }));
    }

    /// The circulant route's implied covariance, read off the embedding
    /// spectrum by an inverse transform, reproduces the exact matrix.
    #[test]
    fn circulant_embedding_reproduces_covariance() {
        let grid = GridSpec::with_default_truncation(2, 8).unwrap();
        let c = circulant_route(&grid, &KernelSpec::Triangular, FieldLimits::default()).unwrap();
        let total = c.sqrt_eigs.len();
        let mut spec: Vec<Complex64> = c.sqrt_eigs.iter().map(|s| Complex64::new(s * s, 0.0)).collect();
        // forward transform of the spectrum equals total * covariance row
        // (the base row is real and even).
        fft_nd(&mut spec, c.side, 2, c.fft.as_ref());
        let exact = covariance_matrix(&grid, &KernelSpec::Triangular);
        for j in 0..grid.num_cells() {
            let cc = grid.cell_coords(j);
            let idx = cc[0] * c.side + cc[1];
            let implied = spec[idx].re;
            assert!((implied - exact[(0, j)]).abs() < 1e-9, "cell {j}: {implied} vs {}", exact[(0, j)]);
        }
        assert_eq!(total, c.side * c.side);
    }

    fn empirical_cov(sampler: &FieldSampler, seeds: std::ops::Range<u64>, pairs: &[(usize, usize)]) -> Vec<f64> {
        let mut acc = vec![0.0; pairs.len()];
        let count = (seeds.end - seeds.start) as f64;
        for seed in seeds {
            let f = sampler.sample(seed);
            for (slot, &(i, j)) in acc.iter_mut().zip(pairs) {
                *slot += f.values[i] * f.values[j];
            }
        }
        acc.iter().map(|a| a / count).collect()
    }

    #[test]
    fn dense_and_circulant_agree_in_law() {
        let grid = GridSpec::with_default_truncation(2, 12).unwrap();
        let k = KernelSpec::Triangular;
        let dense = FieldSampler::new(grid.clone(), &k, Synthesis::Dense, FieldLimits::default()).unwrap();
        let circ = FieldSampler::new(grid.clone(), &k, Synthesis::Circulant, FieldLimits::default()).unwrap();
        assert_eq!(dense.kind(), SamplerKind::Dense);
        assert_eq!(circ.kind(), SamplerKind::Circulant);
        let pairs = [(0, 0), (0, 1), (13, 14), (13, 26), (0, 143), (70, 70)];
        let exact = covariance_matrix(&grid, &k);
        let d = empirical_cov(&dense, 0..3000, &pairs);
        let c = empirical_cov(&circ, 0..3000, &pairs);
        for (p, (&(i, j), (dv, cv))) in pairs.iter().zip(d.iter().zip(&c)).enumerate() {
            let target = exact[(i, j)];
            // sd of a product moment with variance ~ t^2 ~ 6 over 3000 draws is ~0.05
            assert!((dv - target).abs() < 0.2, "dense pair {p}: {dv} vs {target}");
            assert!((cv - target).abs() < 0.2, "circulant pair {p}: {cv} vs {target}");
        }
    }

    #[test]
    fn marginal_variance_matches_truncation() {
        let t = 32f64.ln();
        let grid = GridSpec::new(2, 32, t).unwrap();
        let sampler = FieldSampler::new(grid, &KernelSpec::Triangular, Synthesis::Auto, FieldLimits::default()).unwrap();
        let cells = [0usize, 100, 527, 1023];
        let mut sums = [0.0; 4];
        for seed in 0..500u64 {
            let f = sampler.sample(seed);
            for (s, &c) in sums.iter_mut().zip(&cells) {
                *s += f.values[c] * f.values[c];
            }
        }
        for s in sums {
            let var = s / 500.0;
            assert!((var - t).abs() < 0.1 * t, "variance {var} vs {t}");
        }
    }

    #[test]
    fn one_and_three_dimensional_grids() {
        for (dim, m) in [(1usize, 256usize), (3, 12)] {
            let grid = GridSpec::with_default_truncation(dim, m).unwrap();
            let s = FieldSampler::new(grid.clone(), &KernelSpec::Triangular, Synthesis::Auto, FieldLimits::default()).unwrap();
            let f = s.sample(1);
            assert_eq!(f.values.len(), grid.num_cells());
            assert!(f.values.iter().all(|v| v.is_finite()));
        }
    }
}
