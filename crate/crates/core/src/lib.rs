//! Charge-state modeling of NV centers in surface-functionalized
//! nanodiamonds.
//!
//! * [`bandsolver`]: self-consistent radial band bending under a surface
//!   acceptor layer.
//! * [`occupation`]: NV⁻ occupancy and particle-averaged NV⁻ fraction.
//! * [`spectra`]: two-component unmixing of photoluminescence spectra.
//! * [`kinetics`]: laser-power dependent charge-state rate model and fitting.

pub mod bandsolver;
pub mod constants;
pub mod error;
pub mod kinetics;
pub mod occupation;
pub mod spectra;
pub mod tridiag;

pub use bandsolver::{
    solve_selfconsistent, BandProfile, MaterialParams, RadialGrid, SolverOptions, SurfaceMode,
    SurfaceModel,
};
pub use error::{Error, Result};
