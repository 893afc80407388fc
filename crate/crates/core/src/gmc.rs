//! Discrete chaos measure `M^γ_t(dx) = exp(γ X_t(x) - γ² t / 2) dx` on the
//! field grid.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FgnError, Result};
use crate::field::{FieldGrid, GridSpec};

/// Upper end of the subcritical range for `ν = γ²/d`.
pub const CRITICAL_NU: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmcMeasure {
    pub gamma: f64,
    pub nu: f64,
    pub grid: GridSpec,
    pub cell_masses: Vec<f64>,
    pub total_mass: f64,
}

/// `γ²/d`, rejecting negative or non-finite couplings and `ν >= 2`.
pub fn fractality(gamma: f64, dim: usize) -> Result<f64> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(FgnError::InvalidParameter(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if dim == 0 {
        return Err(FgnError::InvalidParameter("dimension must be >= 1".into()));
    }
    let nu = gamma * gamma / dim as f64;
    if nu >= CRITICAL_NU {
        return Err(FgnError::Supercritical { nu });
    }
    Ok(nu)
}

/// `γ = sqrt(ν d)`.
pub fn gamma_for_nu(nu: f64, dim: usize) -> Result<f64> {
    if !nu.is_finite() || nu < 0.0 {
        return Err(FgnError::InvalidParameter(format!("nu must be finite and >= 0, got {nu}")));
    }
    if nu >= CRITICAL_NU {
        return Err(FgnError::Supercritical { nu });
    }
    Ok((nu * dim as f64).sqrt())
}

impl GmcMeasure {
    /// Lebesgue measure on the grid: every cell has mass `h^d`, total 1.
    pub fn lebesgue(grid: GridSpec) -> Self {
        let vol = grid.cell_volume();
        let cells = grid.num_cells();
        Self {
            gamma: 0.0,
            nu: 0.0,
            cell_masses: vec![vol; cells],
            total_mass: 1.0,
            grid,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn t(&self) -> f64 {
        self.grid.t
    }

    /// Writes `cell_index, x_1..x_d, field_value, mass` rows.
    pub fn write_csv<W: Write>(&self, field: Option<&FieldGrid>, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("cell_index");
        for k in 0..self.grid.dim {
            header.push_str(&format!(",x{}", k + 1));
        }
        header.push_str(",field_value,mass");
        writeln!(out, "{header}")?;
        for (i, mass) in self.cell_masses.iter().enumerate() {
            let mut line = i.to_string();
            for c in self.grid.cell_center(i) {
                line.push_str(&format!(",{c}"));
            }
            let value = field.map_or(0.0, |f| f.values[i]);
            line.push_str(&format!(",{value},{mass}"));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Exponentiates a field realisation into cell masses.
///
/// `γ = 0` or `t = 0` returns the Lebesgue measure exactly.
pub fn gmc_from_field(field: &FieldGrid, gamma: f64) -> Result<GmcMeasure> {
    let nu = fractality(gamma, field.grid.dim)?;
    if gamma == 0.0 || field.grid.t == 0.0 {
        let mut m = GmcMeasure::lebesgue(field.grid.clone());
        m.gamma = gamma;
        m.nu = nu;
        return Ok(m);
    }
    let vol = field.grid.cell_volume();
    let shift = 0.5 * gamma * gamma * field.grid.t;
    let cell_masses: Vec<f64> = field
        .values
        .iter()
        .map(|&x| (gamma * x - shift).exp() * vol)
        .collect();
    let total_mass: f64 = cell_masses.iter().sum();
    if !(total_mass > 0.0) || !total_mass.is_finite() {
        return Err(FgnError::Numerical(format!("total mass {total_mass} is not a positive finite number")));
    }
    Ok(GmcMeasure {
        gamma,
        nu,
        grid: field.grid.clone(),
        cell_masses,
        total_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldLimits, FieldSampler, Synthesis};
    use crate::kernel::KernelSpec;

    fn field(dim: usize, m: usize, t: f64, values: Vec<f64>) -> FieldGrid {
        FieldGrid {
            grid: GridSpec::new(dim, m, t).unwrap(),
            values,
            seed: 0,
        }
    }

    #[test]
    fn zero_coupling_is_lebesgue() {
        let f = field(2, 4, 1.0, (0..16).map(f64::from).collect());
        let m = gmc_from_field(&f, 0.0).unwrap();
        assert!(m.cell_masses.iter().all(|&x| x == 1.0 / 16.0));
        assert_eq!(m.total_mass, 1.0);
    }

    #[test]
    fn single_cell_substitution() {
        let m = gmc_from_field(&field(1, 1, 1.0, vec![0.0]), 1.0).unwrap();
        assert!((m.cell_masses[0] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(m.nu, 1.0);
    }

    #[test]
    fn supercritical_is_refused() {
        let f = field(1, 1, 1.0, vec![0.0]);
        assert!(matches!(gmc_from_field(&f, 1.5), Err(FgnError::Supercritical { .. })));
        assert!(gmc_from_field(&f, 2f64.sqrt() - 1e-9).is_ok());
        assert!(matches!(gamma_for_nu(2.0, 2), Err(FgnError::Supercritical { .. })));
        assert!(gmc_from_field(&f, -0.1).is_err());
    }

    #[test]
    fn total_mass_has_unit_mean() {
        let t = 64f64.ln();
        let grid = GridSpec::new(2, 64, t).unwrap();
        let sampler = FieldSampler::new(grid, &KernelSpec::Triangular, Synthesis::Auto, FieldLimits::default()).unwrap();
        let gamma = gamma_for_nu(0.4, 2).unwrap();
        let mean = (0..300u64)
            .map(|s| gmc_from_field(&sampler.sample(s), gamma).unwrap().total_mass)
            .sum::<f64>()
            / 300.0;
        assert!((mean - 1.0).abs() < 0.1, "mean total mass {mean}");
    }

    #[test]
    fn csv_dump_has_one_row_per_cell() {
        let f = field(2, 2, 1.0, vec![0.0, 0.1, -0.1, 0.2]);
        let m = gmc_from_field(&f, 0.5).unwrap();
        let mut buf = Vec::new();
        m.write_csv(Some(&f), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cell_index,x1,x2,field_value,mass");
        assert_eq!(lines.len(), 5);
        assert!(lines[2].starts_with("1,-0.25,0.25,0.1,"));
    }
}
