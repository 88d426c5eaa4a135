//! NV charge-state statistics on top of a converged band profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandsolver::{
    solve_selfconsistent, BandProfile, MaterialParams, RadialGrid, SolverOptions, SurfaceMode,
    SurfaceModel,
};
use crate::constants::thermal_energy;
use crate::error::{domain, Error, Result};

/// `1 / (1 + exp(x / kt))`, evaluated without overflow.
pub fn fermi_dirac(x: f64, kt: f64) -> f64 {
    let y = x / kt;
    if y > 0.0 {
        let e = (-y).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + y.exp())
    }
}

/// Derivative magnitude `f (1 - f) / kt` of [`fermi_dirac`].
pub(crate) fn fermi_dirac_slope(x: f64, kt: f64) -> f64 {
    let e = (-(x / kt).abs()).exp();
    e / ((1.0 + e) * (1.0 + e) * kt)
}

/// Probability that an NV center whose transition level sits
/// `level_minus_fermi` eV above the Fermi level holds the extra electron.
pub fn nv_minus_occupancy(level_minus_fermi: f64, temperature: f64) -> Result<f64> {
    if !level_minus_fermi.is_finite() || !temperature.is_finite() {
        return Err(Error::Numeric("occupancy arguments must be finite".into()));
    }
    if temperature <= 0.0 {
        return domain(format!("temperature must be positive, got {temperature} K"));
    }
    Ok(fermi_dirac(level_minus_fermi, thermal_energy(temperature)))
}

/// Radial distribution of NV centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DensityProfile {
    /// Constant NV density per unit volume.
    UniformVolume,
    /// Constant density per unit depth, ignoring the shell area.
    UniformDepth,
    /// Volume density per node, normalized so that ∫ 4πr² g dr = 1 under
    /// the trapezoidal rule on the solver grid.
    Custom(Vec<f64>),
}

impl DensityProfile {
    /// Checks a custom volume density against `grid`, returning the profile.
    pub fn custom(grid: &RadialGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return domain(format!(
                "density profile has {} weights for {} nodes",
                weights.len(),
                grid.len()
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return domain("density weights must be finite and non-negative");
        }
        let integrand: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(&weights)
            .map(|(r, g)| 4.0 * std::f64::consts::PI * r * r * g)
            .collect();
        let total = trapezoid(&integrand, grid.step());
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("density profile integrates to {total}, expected 1"));
        }
        Ok(Self::Custom(weights))
    }

    /// Integrand weight per node with respect to dr (unnormalized).
    fn radial_weights(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        match self {
            Self::UniformVolume => Ok(grid.nodes().iter().map(|r| r * r).collect()),
            Self::UniformDepth => Ok(vec![1.0; grid.len()]),
            Self::Custom(g) => {
                if g.len() != grid.len() {
                    return domain("custom density profile does not match the grid");
                }
                Ok(grid
                    .nodes()
                    .iter()
                    .zip(g)
                    .map(|(r, g)| 4.0 * std::f64::consts::PI * r * r * g)
                    .collect())
            }
        }
    }
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() * step
}

/// ⟨n₋⟩ at every node of a band profile.
pub fn occupancy_profile(profile: &BandProfile, params: &MaterialParams) -> Vec<f64> {
    let kt = params.kt();
    profile
        .nv_level_offsets(params)
        .into_iter()
        .map(|x| fermi_dirac(x, kt))
        .collect()
}

/// Weighted average of a per-node occupancy over the NV distribution `g`,
/// by the trapezoidal rule.
pub fn average_occupancy(grid: &RadialGrid, occupancy: &[f64], g: &DensityProfile) -> Result<f64> {
    if occupancy.len() != grid.len() {
        return domain("occupancy length does not match the grid");
    }
    let w = g.radial_weights(grid)?;
    let norm = trapezoid(&w, grid.step());
    if !(norm > 0.0) {
        return domain("density profile has zero weight");
    }
    let weighted: Vec<f64> = w.iter().zip(occupancy).map(|(w, n)| w * n).collect();
    Ok((trapezoid(&weighted, grid.step()) / norm).clamp(0.0, 1.0))
}

/// Particle-averaged NV⁻ fraction of a converged band profile.
pub fn nv_minus_fraction(profile: &BandProfile, params: &MaterialParams, g: &DensityProfile) -> Result<f64> {
    if !profile.converged {
        return domain("NV⁻ fraction requires a converged band profile");
    }
    average_occupancy(&profile.grid, &occupancy_profile(profile, params), g)
}

/// NV⁻ fraction as a function of surface acceptor density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionCurve {
    pub densities: Vec<f64>,
    /// NaN where the solver failed outright.
    pub fractions: Vec<f64>,
    pub converged: Vec<bool>,
    pub profiles: Option<Vec<Option<BandProfile>>>,
}

impl FractionCurve {
    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }
}

/// Runs the self-consistent solve for each acceptor density in parallel.
/// Unconverged points are flagged and keep their best-effort fraction.
pub fn sweep_surface_density(
    densities: &[f64],
    params: &MaterialParams,
    grid: &RadialGrid,
    mode: SurfaceMode,
    g: &DensityProfile,
    opts: &SolverOptions,
    keep_profiles: bool,
) -> Result<FractionCurve> {
    if densities.is_empty() {
        return domain("density list is empty");
    }
    if densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return domain("densities must be finite and non-negative");
    }
    if densities.windows(2).any(|w| w[1] <= w[0]) {
        return domain("densities must be strictly increasing");
    }

    let points: Vec<(f64, bool, Option<BandProfile>)> = densities
        .par_iter()
        .map(|&d| {
            let surface = SurfaceModel {
                acceptor_density: d,
                mode,
            };
            match solve_selfconsistent(params, grid, &surface, opts) {
                Ok(profile) => {
                    let occ = occupancy_profile(&profile, params);
                    let f = average_occupancy(grid, &occ, g).unwrap_or(f64::NAN);
                    (f, profile.converged, Some(profile))
                }
                Err(_) => (f64::NAN, false, None),
            }
        })
        .collect();

    if points.iter().all(|p| !p.1) {
        return Err(Error::Sweep(format!(
            "none of the {} densities converged",
            densities.len()
        )));
    }

    let fractions = points.iter().map(|p| p.0).collect();
    let converged = points.iter().map(|p| p.1).collect();
    let profiles = keep_profiles.then(|| points.into_iter().map(|p| p.2).collect());
    Ok(FractionCurve {
        densities: densities.to_vec(),
        fractions,
        converged,
        profiles,
    })
}
