//! Fixtures shared by the solver benchmarks.

use nvcharge::kinetics::integrator::Tolerances;
use nvcharge::kinetics::{simulate_sweep, steady_state, KineticParams, PowerCurve};
use nvcharge::spectra::{ReferenceSet, Spectrum};

/// A 0.754 NV⁻ mixture of the synthetic references with a fixed ripple
/// standing in for detector noise.
pub fn mixed_spectrum(refs: &ReferenceSet) -> Spectrum {
    let intensities = refs
        .ref_minus
        .intensities()
        .iter()
        .zip(refs.ref_zero.intensities())
        .enumerate()
        .map(|(i, (m, z))| (0.754 * m + 0.246 * z) * (1.0 + 0.01 * (i as f64 * 0.7).sin()))
        .collect();
    Spectrum::new(refs.ref_minus.wavelengths().to_vec(), intensities, "bench").expect("valid spectrum")
}

/// Up-and-down power ladder over `lo..=hi` mW with `n` rungs each way.
pub fn up_down_powers(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let asc: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    let mut p = asc.clone();
    p.extend(asc.iter().rev().skip(1));
    p
}

/// Noiseless power curve generated by `params`.
pub fn synthetic_curve(params: &KineticParams, dwell: f64) -> PowerCurve {
    let powers = up_down_powers(0.05, 50.0, 10);
    let start = steady_state(powers[0], params).expect("steady state");
    let traj = simulate_sweep(&powers, dwell, params, start, Tolerances::default()).expect("sweep");
    PowerCurve::new(powers, traj.fractions, dwell).expect("valid curve")
}
