//! Electrostatics of a spherical nanodiamond with a charged surface layer.

mod charge;
mod grid;
mod material;
mod poisson;
mod selfconsistent;
mod surface;

pub use charge::{charge_density, Carriers};
pub use grid::RadialGrid;
pub use material::{ppm_to_density, MaterialParams};
pub use poisson::{coupling, net_charge, poisson_residual, solve_poisson_radial};
pub use selfconsistent::{
    crossover_depth, flat_band_fermi_level, solve_selfconsistent, BandProfile, SolverOptions,
};
pub use surface::{SurfaceMode, SurfaceModel};
