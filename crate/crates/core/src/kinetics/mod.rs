//! Laser-power dependence of the NV charge state.

pub mod fit;
pub mod integrator;
mod model;
mod sweep;

pub use fit::{fit_power_curve, FitOptions, InitialCondition, KineticFit, ParamBounds};
pub use model::{
    steady_state, steady_state_fraction, ChargeState, KineticParams, PowerExponents, Rates,
};
pub use sweep::{
    evolve, hysteresis_area, load_power_curve, simulate_sweep, write_power_curve, PowerCurve,
    SweepTrajectory, POWER_CURVE_HEADER,
};
