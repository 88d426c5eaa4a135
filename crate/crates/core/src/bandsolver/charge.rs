//! Semiclassical space charge: Fermi-Dirac donors and NV acceptors,
//! Boltzmann electrons and holes, all rigidly shifted by the local φ.

use super::material::MaterialParams;
use crate::error::{Error, Result};
use crate::occupation::{fermi_dirac, fermi_dirac_slope};

// Keeps exp() finite for far-off trial Fermi levels.
const MAX_EXPONENT: f64 = 700.0;

fn boltzmann(x: f64) -> f64 {
    x.min(MAX_EXPONENT).exp()
}

/// Charge density and its derivative with respect to the local band shift.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalCharge {
    pub rho: f64,
    pub drho_dphi: f64,
}

/// Species densities at one node, nm⁻³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Carriers {
    pub ionized_donors: f64,
    pub nv_minus: f64,
    pub electrons: f64,
    pub holes: f64,
}

impl Carriers {
    pub fn at(phi: f64, fermi_level: f64, params: &MaterialParams) -> Self {
        let kt = params.kt();
        let ionized_donors = params.donor_density() * fermi_dirac(fermi_level - params.donor_level() - phi, kt);
        let nv_minus = params.nv_density() * fermi_dirac(params.e_nv_transition + phi - fermi_level, kt);
        let electrons = params.n_c * boltzmann((fermi_level - params.e_gap - phi) / kt);
        let holes = params.n_v * boltzmann((phi - fermi_level) / kt);
        Self {
            ionized_donors,
            nv_minus,
            electrons,
            holes,
        }
    }

    /// Net density in units of e·nm⁻³.
    pub fn net(&self) -> f64 {
        self.ionized_donors - self.nv_minus - self.electrons + self.holes
    }
}

pub(crate) fn local_charge(phi: f64, fermi_level: f64, params: &MaterialParams) -> LocalCharge {
    let kt = params.kt();
    let c = Carriers::at(phi, fermi_level, params);
    // Every species raises ρ when the bands move up.
    let drho_dphi = params.donor_density() * fermi_dirac_slope(fermi_level - params.donor_level() - phi, kt)
        + params.nv_density() * fermi_dirac_slope(params.e_nv_transition + phi - fermi_level, kt)
        + (c.electrons + c.holes) / kt;
    LocalCharge {
        rho: c.net(),
        drho_dphi,
    }
}

/// Signed charge density (e·nm⁻³) at each node for band shifts `phi` and
/// a global Fermi level in eV above the unbent VBM.
pub fn charge_density(phi: &[f64], fermi_level: f64, params: &MaterialParams) -> Result<Vec<f64>> {
    if !fermi_level.is_finite() {
        return Err(Error::Numeric("Fermi level is not finite".into()));
    }
    if let Some(i) = phi.iter().position(|p| !p.is_finite()) {
        return Err(Error::Numeric(format!("band shift at node {i} is not finite")));
    }
    Ok(phi
        .iter()
        .map(|&p| local_charge(p, fermi_level, params).rho)
        .collect())
}
