//! Fractality estimation and detection from node and edge counts, log-log
//! scaling fits, and asymptotic count predictions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    SinglePass,
    MultiPass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub nu_hat: f64,
    pub mode: EstimateMode,
    /// `(E, N)` per observed network.
    pub inputs: Vec<(u64, u64)>,
    pub mean_edges: f64,
    pub mean_nodes: f64,
    pub replicates: usize,
}

fn nu_from_means(mean_edges: f64, mean_nodes: f64) -> Result<f64> {
    if !(mean_nodes >= 3.0) {
        return Err(FgnError::InsufficientData(format!(
            "need at least 3 nodes (mean), got {mean_nodes}"
        )));
    }
    if !(mean_edges >= 1.0) {
        return Err(FgnError::InsufficientData(format!(
            "need at least 1 edge (mean), got {mean_edges}"
        )));
    }
    Ok(mean_edges.ln() / mean_nodes.ln() - 1.0)
}

/// `ln E / ln N - 1` from one network.
pub fn estimate_nu_single(edges: u64, nodes: u64) -> Result<EstimateResult> {
    let nu_hat = nu_from_means(edges as f64, nodes as f64)?;
    Ok(EstimateResult {
        nu_hat,
        mode: EstimateMode::SinglePass,
        inputs: vec![(edges, nodes)],
        mean_edges: edges as f64,
        mean_nodes: nodes as f64,
        replicates: 1,
    })
}

/// `ln Ē / ln N̄ - 1` from i.i.d. networks.
pub fn estimate_nu_multi(records: &[(u64, u64)]) -> Result<EstimateResult> {
    if records.is_empty() {
        return Err(FgnError::InsufficientData("no records".into()));
    }
    let m = records.len() as f64;
    let mean_edges = records.iter().map(|r| r.0 as f64).sum::<f64>() / m;
    let mean_nodes = records.iter().map(|r| r.1 as f64).sum::<f64>() / m;
    Ok(EstimateResult {
        nu_hat: nu_from_means(mean_edges, mean_nodes)?,
        mode: EstimateMode::MultiPass,
        inputs: records.to_vec(),
        mean_edges,
        mean_nodes,
        replicates: records.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub declared_fractal: bool,
    pub nu0: f64,
    /// `E`, or `Ē` for the multi-pass rule.
    pub statistic: f64,
    /// `N^{1 + ν0/2}`, or `N̄^{1 + ν0/2}`.
    pub threshold: f64,
    pub nodes: f64,
}

fn detect(statistic: f64, nodes: f64, nu0: f64) -> Result<DetectionResult> {
    if !(nu0 > 0.0) || !nu0.is_finite() {
        return Err(FgnError::InvalidParameter(format!("nu0 must be > 0, got {nu0}")));
    }
    if !(nodes >= 2.0) {
        return Err(FgnError::InsufficientData(format!("need at least 2 nodes, got {nodes}")));
    }
    let threshold = nodes.powf(1.0 + 0.5 * nu0);
    Ok(DetectionResult {
        declared_fractal: statistic > threshold,
        nu0,
        statistic,
        threshold,
        nodes,
    })
}

/// Declares fractality when `E > N^{1 + ν0/2}`.
pub fn detect_fractality(edges: u64, nodes: u64, nu0: f64) -> Result<DetectionResult> {
    detect(edges as f64, nodes as f64, nu0)
}

/// Mean-based rule `Ē > N̄^{1 + ν0/2}`.
pub fn detect_fractality_multi(records: &[(u64, u64)], nu0: f64) -> Result<DetectionResult> {
    if records.is_empty() {
        return Err(FgnError::InsufficientData("no records".into()));
    }
    let m = records.len() as f64;
    let e = records.iter().map(|r| r.0 as f64).sum::<f64>() / m;
    let n = records.iter().map(|r| r.1 as f64).sum::<f64>() / m;
    detect(e, n, nu0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals.
    pub ssr: f64,
}

/// Ordinary least squares of `ys` on `xs`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(FgnError::InsufficientData("need at least two (x, y) points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(FgnError::InsufficientData("x values are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(LineFit { slope, intercept, ssr })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum CountKind {
    Edges,
    Triangles,
    Spokes(usize),
    Cliques(usize),
}

impl std::fmt::Display for CountKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CountKind::Edges => f.write_str("edges"),
            CountKind::Triangles => f.write_str("triangles"),
            CountKind::Spokes(k) => write!(f, "spokes_{k}"),
            CountKind::Cliques(k) => write!(f, "cliques_{k}"),
        }
    }
}

impl std::str::FromStr for CountKind {
    type Err = FgnError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FgnError::Config(format!("unknown count kind '{s}'"));
        match s {
            "edges" => Ok(CountKind::Edges),
            "triangles" => Ok(CountKind::Triangles),
            _ => {
                let (head, k) = s.rsplit_once(['_', ':']).ok_or_else(bad)?;
                let k: usize = k.parse().map_err(|_| bad())?;
                match head {
                    "spokes" => Ok(CountKind::Spokes(k)),
                    "cliques" => Ok(CountKind::Cliques(k)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name", content = "alpha")]
pub enum Aggregator {
    Mean,
    #[default]
    Median,
    /// Mean after dropping a fraction `alpha` from each end.
    TrimmedMean(f64),
}

impl Aggregator {
    pub fn apply(&self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(FgnError::InsufficientData("nothing to aggregate".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Ok(match *self {
            Aggregator::Mean => v.iter().sum::<f64>() / n as f64,
            Aggregator::Median => {
                if n % 2 == 1 {
                    v[n / 2]
                } else {
                    0.5 * (v[n / 2 - 1] + v[n / 2])
                }
            }
            Aggregator::TrimmedMean(alpha) => {
                if !(0.0..0.5).contains(&alpha) {
                    return Err(FgnError::InvalidParameter(format!("trim fraction must lie in [0, 0.5), got {alpha}")));
                }
                let cut = (alpha * n as f64).floor() as usize;
                let kept = &v[cut..n - cut];
                kept.iter().sum::<f64>() / kept.len() as f64
            }
        })
    }
}

impl std::str::FromStr for Aggregator {
    type Err = FgnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregator::Mean),
            "median" => Ok(Aggregator::Median),
            _ => {
                let alpha = s
                    .strip_prefix("trimmed_mean:")
                    .or_else(|| s.strip_prefix("trimmed:"))
                    .and_then(|a| a.parse::<f64>().ok())
                    .ok_or_else(|| FgnError::Config(format!("unknown aggregator '{s}'")))?;
                Ok(Aggregator::TrimmedMean(alpha))
            }
        }
    }
}

/// Replicates at one size parameter: `(N, count)` per replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingBatch {
    pub n: f64,
    pub samples: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: f64,
    pub mean_nodes: f64,
    pub count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub count_kind: CountKind,
    pub aggregator: Aggregator,
}

/// Regresses `ln(aggregated count)` on `ln(mean N)` across batches.
pub fn fit_scaling_exponent(batches: &[ScalingBatch], count_kind: CountKind, aggregator: Aggregator) -> Result<ScalingFit> {
    let mut ns: Vec<f64> = batches.iter().map(|b| b.n).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 3 {
        return Err(FgnError::InsufficientData(format!(
            "need at least 3 distinct size parameters, got {}",
            ns.len()
        )));
    }
    let mut points = Vec::with_capacity(batches.len());
    for b in batches {
        if b.samples.is_empty() {
            return Err(FgnError::InsufficientData(format!("no replicates at n = {}", b.n)));
        }
        let mean_nodes = b.samples.iter().map(|s| s.0 as f64).sum::<f64>() / b.samples.len() as f64;
        let counts: Vec<f64> = b.samples.iter().map(|s| s.1).collect();
        let count = aggregator.apply(&counts)?;
        if !(count > 0.0) || !(mean_nodes > 0.0) {
            return Err(FgnError::InsufficientData(format!(
                "aggregated {count_kind} count is zero at n = {}",
                b.n
            )));
        }
        points.push(ScalingPoint { n: b.n, mean_nodes, count });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.mean_nodes.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.count.ln()).collect();
    let fit = least_squares(&xs, &ys)?;
    if !fit.slope.is_finite() {
        return Err(FgnError::Numerical("scaling slope is not finite".into()));
    }
    Ok(ScalingFit {
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        count_kind,
        aggregator,
    })
}

const QUAD_TOL: f64 = 1e-10;

/// `∫_{R^d} |x|^{-a} e^{-|x|²} dx` for `0 <= a < d`, by radial quadrature.
///
/// On `[0, 1]` the substitution `r = w^{1/(d-a)}` removes the endpoint
/// singularity; the tail is cut at `r = 10`.
pub fn radial_moment(a: f64, dim: usize) -> f64 {
    let d = dim as f64;
    let p = d - a;
    let head = quadrature::integrate(|w: f64| (-w.powf(2.0 / p)).exp(), 0.0, 1.0, QUAD_TOL).integral / p;
    let tail = quadrature::integrate(|r: f64| r.powf(p - 1.0) * (-r * r).exp(), 1.0, 10.0, QUAD_TOL).integral;
    sphere_area(dim) * (head + tail)
}

/// Surface area of the unit sphere in `R^d`, via `|S^{d-1}| = 2π |S^{d-3}| / (d-2)`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI * sphere_area(d - 2) / (d - 2) as f64,
    }
}

fn regime_nu(gamma: f64, dim: usize) -> Result<f64> {
    if dim == 0 || !gamma.is_finite() || gamma < 0.0 {
        return Err(FgnError::InvalidParameter(format!("need gamma >= 0 and d >= 1, got gamma = {gamma}, d = {dim}")));
    }
    Ok(gamma * gamma / dim as f64)
}

fn check_positive(rho: f64, n: f64) -> Result<()> {
    if !(rho > 0.0) || !(n > 0.0) || !rho.is_finite() || !n.is_finite() {
        return Err(FgnError::InvalidParameter(format!("need rho > 0 and n > 0, got rho = {rho}, n = {n}")));
    }
    Ok(())
}

/// Edge-count constant `C(γ, d) = ½ π^{-(d - γ²)/2} ∫ |x|^{-γ²} e^{-|x|²} dx`.
///
/// At `γ = 0` this is exactly ½, so the prediction is `ρ n / 2`.
pub fn edge_constant(gamma: f64, dim: usize) -> f64 {
    let g2 = gamma * gamma;
    0.5 * PI.powf(-0.5 * (dim as f64 - g2)) * radial_moment(g2, dim)
}

/// Asymptotic mean edge count `C(γ, d) ρ^{1-ν} n^{1+ν}`, valid for `ν < 1`.
///
/// The constant takes the field covariance as exactly `ln(1/r)` at small
/// separations; see [`kernel_offset_factor`] for the kernel correction.
pub fn predicted_edge_count(gamma: f64, dim: usize, rho: f64, n: f64) -> Result<f64> {
    let nu = regime_nu(gamma, dim)?;
    check_positive(rho, n)?;
    if nu >= 1.0 {
        return Err(FgnError::OutOfRegime(format!("edge prediction needs nu < 1, got {nu}")));
    }
    Ok(edge_constant(gamma, dim) * rho.powf(1.0 - nu) * n.powf(1.0 + nu))
}

/// Multiplicative correction `exp(γ² c)` per correlated pair, where
/// `φ(r) = ln(1/r) + c + o(1)` as `r → 0`. For the triangular kernel `c = -1`.
pub fn kernel_offset_factor(kernel: &crate::kernel::KernelSpec, gamma: f64) -> Result<f64> {
    let r = 1e-9;
    let c = kernel.phi(r)? + r.ln();
    Ok((gamma * gamma * c).exp())
}

/// `∬_{R^d × R^d} e^{-|u|² - |v|² - |u-v|²} (|u| |v| |u-v|)^{-γ²} du dv`.
///
/// Reduced to the radii `r = |u|`, `s = |v|` and the angle between them,
/// with the `u ↔ v` symmetry used to integrate over `s < r` only. Finite for
/// `γ² < 2d/3`.
pub fn triangle_integral(gamma: f64, dim: usize) -> Result<f64> {
    let g2 = gamma * gamma;
    let d = dim as f64;
    if dim == 0 || 3.0 * g2 >= 2.0 * d {
        return Err(FgnError::OutOfRegime(format!(
            "triangle integral diverges for gamma^2 >= 2d/3 (gamma^2 = {g2}, d = {dim})"
        )));
    }
    let weight = |r: f64, s: f64, w2: f64| -> f64 {
        let base = (-(r * r + s * s + w2)).exp();
        if g2 == 0.0 {
            base
        } else {
            base * (r * s * w2.sqrt()).powf(-g2)
        }
    };
    let r_max = 6.0;
    let tol = 1e-9;
    let value = if dim == 1 {
        // u, v on the line: same sign (|u - v| = r - s) or opposite (r + s)
        let inner = |r: f64| {
            quadrature::integrate(
                |s: f64| weight(r, s, (r - s) * (r - s)) + weight(r, s, (r + s) * (r + s)),
                0.0,
                r,
                tol,
            )
            .integral
        };
        // 2 sign choices for u, times 2 for the s < r half
        4.0 * quadrature::integrate(inner, 0.0, r_max, tol).integral
    } else {
        let inner = |r: f64| {
            quadrature::integrate(
                |s: f64| {
                    let ang = quadrature::integrate(
                        |theta: f64| {
                            let w2 = (r * r + s * s - 2.0 * r * s * theta.cos()).max(0.0);
                            weight(r, s, w2) * theta.sin().powi(dim as i32 - 2)
                        },
                        0.0,
                        PI,
                        tol,
                    )
                    .integral;
                    (r * s).powi(dim as i32 - 1) * ang
                },
                0.0,
                r,
                tol,
            )
            .integral
        };
        // direction of u, relative angle of v, and the s < r half
        2.0 * sphere_area(dim) * sphere_area(dim - 1) * quadrature::integrate(inner, 0.0, r_max, tol).integral
    };
    if !value.is_finite() || value <= 0.0 {
        return Err(FgnError::Numerical(format!("triangle integral did not converge (got {value})")));
    }
    Ok(value)
}

/// Asymptotic mean triangle count
/// `(1/6) π^{-(2d - 3γ²)/2} J(γ, d) ρ^{2-3ν} n^{1+3ν}`, for `ν < 1/2`.
///
/// Each of the three pairs in a triangle carries its own `|x - y|^{-γ²}`
/// correlation, so the size exponent is `1 + 3ν`.
pub fn predicted_triangle_count(gamma: f64, dim: usize, rho: f64, n: f64) -> Result<f64> {
    let nu = regime_nu(gamma, dim)?;
    check_positive(rho, n)?;
    if nu >= 0.5 {
        return Err(FgnError::OutOfRegime(format!("triangle prediction needs nu < 1/2, got {nu}")));
    }
    let g2 = gamma * gamma;
    let d = dim as f64;
    let j = triangle_integral(gamma, dim)?;
    Ok(PI.powf(-0.5 * (2.0 * d - 3.0 * g2)) * j / 6.0 * rho.powf(2.0 - 3.0 * nu) * n.powf(1.0 + 3.0 * nu))
}

/// Size exponent of the mean triangle count.
pub fn triangle_exponent(nu: f64) -> f64 {
    1.0 + 3.0 * nu
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotifFamily {
    Spokes,
    Cliques,
}

/// Whether `ν` lies in the range where the spoke (`k >= 2`) or clique
/// (`k >= 3`) mean counts are known to be finite and of order `n^{1+ν}`.
pub fn spoke_clique_regime_check(k: usize, gamma: f64, dim: usize, family: MotifFamily) -> Result<bool> {
    let nu = regime_nu(gamma, dim)?;
    let kf = k as f64;
    let bound = match family {
        MotifFamily::Spokes => {
            if k < 2 {
                return Err(FgnError::InvalidParameter(format!("spokes need k >= 2, got {k}")));
            }
            (1.0 / kf).min(2.0 / (kf * (kf - 1.0)))
        }
        MotifFamily::Cliques => {
            if k < 3 {
                return Err(FgnError::InvalidParameter(format!("cliques need k >= 3, got {k}")));
            }
            (1.0 / (kf - 1.0)).min(2.0 / ((kf - 1.0) * (kf - 2.0)))
        }
    };
    Ok(nu < bound)
}
