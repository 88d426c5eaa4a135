//! Physical constants in the unit system used throughout the crate
//! (lengths in nm, energies in eV, densities in nm⁻³).

/// Boltzmann constant, eV/K.
pub const BOLTZMANN_EV: f64 = 8.617_333_262e-5;

/// Elementary charge over vacuum permittivity, V·nm.
///
/// A density of one elementary charge per nm³ curves the band edges by
/// `E_OVER_EPS0 / eps_r` eV/nm².
pub const E_OVER_EPS0: f64 = 18.095_128_0;

/// Thermal energy `k_B T` in eV.
pub fn thermal_energy(temperature_k: f64) -> f64 {
    BOLTZMANN_EV * temperature_k
}

/// Converts a volume density from cm⁻³ to nm⁻³.
pub const fn per_cm3_to_per_nm3(value: f64) -> f64 {
    value * 1e-21
}
