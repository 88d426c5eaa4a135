use serde::{Deserialize, Serialize};

use crate::constants::{per_cm3_to_per_nm3, thermal_energy};
use crate::error::{domain, Result};

/// Physical parameters of the diamond host and its defects.
///
/// Energies are measured upward from the valence-band maximum of the
/// unbent bands; densities are in nm⁻³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub eps_r: f64,
    pub e_gap: f64,
    /// NV⁻/NV⁰ charge-transition level above the VBM, eV.
    pub e_nv_transition: f64,
    /// Substitutional-nitrogen donor depth below the CBM, eV.
    pub e_donor_ionization: f64,
    pub n_donor_ppm: f64,
    pub n_nv_ppm: f64,
    /// Lattice sites per nm³.
    pub atomic_density: f64,
    pub n_c: f64,
    pub n_v: f64,
    pub temperature: f64,
}

impl Default for MaterialParams {
    /// 100 ppm nitrogen at 1.7 eV, 1 ppm NV at 2.8 eV, 300 K. Gap,
    /// permittivity, lattice density and effective densities of states are
    /// the usual room-temperature diamond values.
    fn default() -> Self {
        Self {
            eps_r: 5.7,
            e_gap: 5.47,
            e_nv_transition: 2.8,
            e_donor_ionization: 1.7,
            n_donor_ppm: 100.0,
            n_nv_ppm: 1.0,
            atomic_density: 176.0,
            n_c: per_cm3_to_per_nm3(1e20),
            n_v: per_cm3_to_per_nm3(2.7e19),
            temperature: 300.0,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.eps_r,
            self.e_gap,
            self.e_nv_transition,
            self.e_donor_ionization,
            self.n_donor_ppm,
            self.n_nv_ppm,
            self.atomic_density,
            self.n_c,
            self.n_v,
            self.temperature,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return domain("material parameters must be finite");
        }
        if !(self.eps_r > 0.0 && self.atomic_density > 0.0 && self.n_c > 0.0 && self.n_v > 0.0) {
            return domain("eps_r, atomic_density, n_c and n_v must be positive");
        }
        if self.temperature <= 0.0 {
            return domain("temperature must be positive");
        }
        if self.e_gap <= 0.0 {
            return domain("band gap must be positive");
        }
        if !(self.e_nv_transition > 0.0 && self.e_nv_transition < self.e_gap) {
            return domain(format!(
                "NV transition level {} eV must lie inside the gap (0, {})",
                self.e_nv_transition, self.e_gap
            ));
        }
        if !(self.e_donor_ionization > 0.0 && self.e_donor_ionization < self.e_gap) {
            return domain(format!(
                "donor ionization energy {} eV must lie inside the gap (0, {})",
                self.e_donor_ionization, self.e_gap
            ));
        }
        if self.n_donor_ppm < 0.0 || self.n_nv_ppm < 0.0 {
            return domain("defect concentrations must be non-negative");
        }
        if self.n_nv_ppm > self.n_donor_ppm {
            return domain(format!(
                "NV concentration {} ppm exceeds donor concentration {} ppm",
                self.n_nv_ppm, self.n_donor_ppm
            ));
        }
        Ok(())
    }

    pub fn kt(&self) -> f64 {
        thermal_energy(self.temperature)
    }

    /// Donor level of the unbent bands, eV above the VBM.
    pub fn donor_level(&self) -> f64 {
        self.e_gap - self.e_donor_ionization
    }

    pub fn donor_density(&self) -> f64 {
        self.n_donor_ppm * 1e-6 * self.atomic_density
    }

    pub fn nv_density(&self) -> f64 {
        self.n_nv_ppm * 1e-6 * self.atomic_density
    }
}

/// Converts a lattice-site fraction in ppm into a volume density in nm⁻³.
pub fn ppm_to_density(ppm: f64, params: &MaterialParams) -> Result<f64> {
    if !ppm.is_finite() || ppm < 0.0 {
        return domain(format!("concentration must be a non-negative number, got {ppm} ppm"));
    }
    Ok(ppm * 1e-6 * params.atomic_density)
}
