//! Radial kernels driving the truncated log-correlated field.
//!
//! The field `X_t` has covariance
//! `K_t(r) = ∫_1^{e^t} k(u r) / u du = ∫_r^{r e^t} k(v) / v dv`, and the
//! tail integral `φ(r) = ∫_r^∞ k(v) / v dv` is its `t → ∞` limit for `r > 0`.
//! A kernel must satisfy `k(0) = 1`, be non-negative and continuous, and have
//! `∫_1^∞ k(u) / u du < ∞`.

use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};

/// Quadrature target per segment of a tabulated profile.
const QUAD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(r) = max(0, 1 - r)`.
    #[default]
    Triangular,
    /// Piecewise-linear profile through the given nodes.
    Tabulated(TabulatedProfile),
}

/// Radial profile sampled at increasing radii, linearly interpolated between
/// nodes and held constant beyond the last node.
///
/// A profile whose last value is non-zero has a divergent tail integral and
/// is rejected by [`KernelSpec::phi`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabulatedProfile {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.len() != values.len() || radii.len() < 2 {
            return Err(FgnError::InvalidKernel(
                "need at least two (radius, value) nodes of equal length".into(),
            ));
        }
        if radii[0] != 0.0 || values[0] != 1.0 {
            return Err(FgnError::InvalidKernel(
                "profile must start at r = 0 with k(0) = 1".into(),
            ));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(FgnError::InvalidKernel(
                "radii must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FgnError::InvalidKernel(
                "kernel values must be finite and non-negative".into(),
            ));
        }
        Ok(Self { radii, values })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, r: f64) -> f64 {
        let last = self.radii.len() - 1;
        if r >= self.radii[last] {
            return self.values[last];
        }
        let seg = self.radii.partition_point(|&x| x <= r) - 1;
        let (r0, r1) = (self.radii[seg], self.radii[seg + 1]);
        let (k0, k1) = (self.values[seg], self.values[seg + 1]);
        k0 + (k1 - k0) * (r - r0) / (r1 - r0)
    }

    /// `∫_lo^hi k(v)/v dv` for `0 < lo <= hi <= ∞`.
    fn log_integral(&self, lo: f64, hi: f64) -> f64 {
        let last_r = *self.radii.last().unwrap();
        let last_v = *self.values.last().unwrap();
        let mut total = 0.0;

        // Adaptive double-exponential quadrature in s = ln v, one segment at
        // a time so the profile's kinks sit on segment endpoints.
        let mut a = lo;
        for &node in self.radii.iter().skip(1) {
            if a >= hi.min(last_r) {
                break;
            }
            if node <= a {
                continue;
            }
            let b = node.min(hi);
            let out = quadrature::integrate(|s| self.eval(s.exp()), a.ln(), b.ln(), QUAD_TOL);
            total += out.integral;
            a = b;
        }

        if hi > last_r {
            let from = lo.max(last_r);
            if last_v > 0.0 {
                total += last_v * (hi.ln() - from.ln());
            }
        }
        total
    }
}

impl KernelSpec {
    /// Evaluates `k(r)` for `r >= 0`.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            KernelSpec::Triangular => (1.0 - r).max(0.0),
            KernelSpec::Tabulated(p) => p.eval(r),
        }
    }

    /// Tail integral `φ(r) = ∫_r^∞ k(u)/u du`, `r > 0`.
    pub fn phi(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(FgnError::InvalidParameter(format!(
                "phi requires a finite r > 0, got {r}"
            )));
        }
        let value = match self {
            KernelSpec::Triangular => triangular_log_integral(r, f64::INFINITY),
            KernelSpec::Tabulated(p) => p.log_integral(r, f64::INFINITY),
        };
        if !value.is_finite() {
            return Err(FgnError::InvalidKernel(format!(
                "tail integral diverges at r = {r}; kernel must decay so that ∫_1^∞ k(u)/u du < ∞"
            )));
        }
        Ok(value)
    }

    /// Truncated covariance `K_t(r)`; `K_t(0) = t` because `k(0) = 1`.
    pub fn covariance(&self, r: f64, t: f64) -> f64 {
        debug_assert!(r >= 0.0 && t >= 0.0);
        if t == 0.0 {
            return 0.0;
        }
        if r == 0.0 {
            return t;
        }
        let hi = r * t.exp();
        match self {
            KernelSpec::Triangular => triangular_log_integral(r, hi),
            KernelSpec::Tabulated(p) => p.log_integral(r, hi),
        }
    }

    /// Checks the kernel assumptions that can be verified numerically.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Triangular => Ok(()),
            KernelSpec::Tabulated(p) => {
                let last = *p.values.last().unwrap();
                if last != 0.0 {
                    return Err(FgnError::InvalidKernel(format!(
                        "profile does not decay: k = {last} beyond r = {}",
                        p.radii.last().unwrap()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Closed form of `∫_lo^hi (1 - v)_+ / v dv`: the antiderivative on (0, 1] is
/// `ln v - v` and the integrand vanishes beyond 1.
fn triangular_log_integral(lo: f64, hi: f64) -> f64 {
    if lo >= 1.0 {
        return 0.0;
    }
    let top = hi.min(1.0);
    (top.ln() - top) - (lo.ln() - lo)
}

/// `φ(r)` for the given kernel.
pub fn kernel_phi(spec: &KernelSpec, r: f64) -> Result<f64> {
    spec.phi(r)
}

/// `K_t(r)` for the given kernel.
pub fn covariance_t(spec: &KernelSpec, r: f64, t: f64) -> Result<f64> {
    if !(r >= 0.0) || !(t >= 0.0) || !r.is_finite() || !t.is_finite() {
        return Err(FgnError::InvalidParameter(format!(
            "covariance needs finite r >= 0 and t >= 0, got r = {r}, t = {t}"
        )));
    }
    Ok(spec.covariance(r, t))
}
