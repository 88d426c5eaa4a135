use nvcharge::kinetics::integrator::Tolerances;
use nvcharge::kinetics::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn log_powers(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Up the ladder and back down, sharing the top rung.
fn up_down(asc: &[f64]) -> Vec<f64> {
    let mut p = asc.to_vec();
    p.extend(asc.iter().rev().skip(1));
    p
}

fn long_time_fraction(power: f64, params: &KineticParams) -> f64 {
    let start = ChargeState::new(0.5, 0.0);
    let rates = params.rates(power);
    let slow = rates.slowest_rate(steady_state(power, params).unwrap());
    let t = (100.0 / rates.ionization).max(100.0 / slow);
    evolve(power, t, params, start, Tolerances::default()).unwrap().nv_minus
}

#[test]
fn closed_form_matches_long_time_integration() {
    let params = KineticParams::default();
    for p in log_powers(0.01, 10.0, 13) {
        let closed = steady_state_fraction(p, &params).unwrap();
        let ode = long_time_fraction(p, &params);
        assert!((closed - ode).abs() < 1e-6, "P = {p}: {closed} vs {ode}");
    }
}

#[test]
fn default_response_rises_over_tested_range() {
    let params = KineticParams::default();
    let f: Vec<f64> = log_powers(0.01, 5.0, 40)
        .iter()
        .map(|&p| steady_state_fraction(p, &params).unwrap())
        .collect();
    assert!(f.windows(2).all(|w| w[1] >= w[0]), "{f:?}");
    assert!(f[0] < 0.2 && f[f.len() - 1] > 0.6);
}

#[test]
fn instant_release_leaves_no_memory() {
    let params = KineticParams { delta: 1e9, ..KineticParams::default() };
    let asc = log_powers(0.05, 5.0, 8);
    let powers = up_down(&asc);
    let start = steady_state(powers[0], &params).unwrap();
    let traj = simulate_sweep(&powers, 1e6, &params, start, Tolerances::default()).unwrap();
    let n = asc.len();
    for k in 0..n {
        let up = traj.fractions[k];
        let down = traj.fractions[powers.len() - 1 - k];
        assert!((up - down).abs() < 1e-6, "P = {}: {up} vs {down}", asc[k]);
    }
}

#[test]
fn slow_release_holds_charge_on_the_way_down() {
    let params = KineticParams { delta: 1e-3, ..KineticParams::default() };
    let asc = log_powers(0.05, 5.0, 8);
    let powers = up_down(&asc);
    let start = steady_state(powers[0], &params).unwrap();
    let traj = simulate_sweep(&powers, 30.0, &params, start, Tolerances::default()).unwrap();
    let n = asc.len();
    for k in 0..n - 1 {
        let up = traj.fractions[k];
        let down = traj.fractions[powers.len() - 1 - k];
        assert!(down > up, "P = {}: ascending {up}, descending {down}", asc[k]);
    }
    let area = hysteresis_area(&powers, &traj.fractions).unwrap();
    assert!(area > 0.0);
}

fn synthetic_curve(truth: &KineticParams, dwell: f64) -> PowerCurve {
    let powers = up_down(&log_powers(0.05, 50.0, 10));
    let start = steady_state(powers[0], truth).unwrap();
    let traj = simulate_sweep(&powers, dwell, truth, start, Tolerances::default()).unwrap();
    PowerCurve::new(powers, traj.fractions, dwell).unwrap()
}

fn perturbed(p: &KineticParams) -> KineticParams {
    KineticParams {
        alpha: p.alpha * 1.2,
        beta: p.beta * 0.8,
        gamma: p.gamma * 1.2,
        delta: p.delta * 0.8,
        trap_capacity: p.trap_capacity * 1.2,
        exponents: p.exponents,
    }
}

fn relative_errors(fit: &KineticParams, truth: &KineticParams) -> [f64; 5] {
    let f = [fit.alpha, fit.beta, fit.gamma, fit.delta, fit.trap_capacity];
    let t = [truth.alpha, truth.beta, truth.gamma, truth.delta, truth.trap_capacity];
    std::array::from_fn(|i| (f[i] - t[i]).abs() / t[i])
}

#[test]
fn noiseless_round_trip_recovers_parameters() {
    let truth = KineticParams::default();
    let curve = synthetic_curve(&truth, 10.0);
    let fit = fit_power_curve(&curve, &perturbed(&truth), &ParamBounds::default(), &FitOptions::default())
        .unwrap();
    assert!(fit.converged);
    assert!(fit.residual_rms < 1e-8, "rms {}", fit.residual_rms);
    for (i, e) in relative_errors(&fit.params, &truth).iter().enumerate() {
        assert!(*e < 0.05, "parameter {i} off by {e}");
    }
    assert!(fit.covariance.is_some());
    assert!(fit.hysteresis_area.is_some());
}

fn noisy_fit(seed: u64) -> (KineticFit, PowerCurve) {
    let truth = KineticParams::default();
    let clean = synthetic_curve(&truth, 60.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let fractions = clean
        .fractions
        .iter()
        .map(|f| (f + noise.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    let curve = PowerCurve::new(clean.powers.clone(), fractions, clean.dwell).unwrap();
    let fit = fit_power_curve(&curve, &perturbed(&truth), &ParamBounds::default(), &FitOptions::default())
        .unwrap();
    (fit, curve)
}

#[test]
fn noisy_fit_tracks_true_steady_state() {
    let truth = KineticParams::default();
    let probe = log_powers(0.05, 50.0, 10);
    for seed in 0..4 {
        let (fit, _) = noisy_fit(seed);
        assert!(fit.converged, "seed {seed}");
        let mse = probe
            .iter()
            .map(|&p| {
                let d = steady_state_fraction(p, &fit.params).unwrap() - steady_state_fraction(p, &truth).unwrap();
                d * d
            })
            .sum::<f64>()
            / probe.len() as f64;
        assert!(mse.sqrt() < 0.03, "seed {seed}: steady-state rms {}", mse.sqrt());
    }
}

#[test]
fn fitted_point_is_stationary() {
    let (fit, curve) = noisy_fit(11);
    assert!(fit.gradient_measure <= FitOptions::default().gtol);
    // Independent check: a small relative nudge of any parameter changes the cost only
    // at second order.
    let tol = FitOptions::default().tolerances;
    let cost = |p: &KineticParams| -> f64 {
        let start = steady_state(curve.powers[0], p).unwrap();
        let traj = simulate_sweep(&curve.powers, curve.dwell, p, start, tol).unwrap();
        traj.fractions.iter().zip(&curve.fractions).map(|(s, m)| (s - m).powi(2)).sum::<f64>()
    };
    let base = cost(&fit.params);
    let nudge = |i: usize, s: f64| {
        let mut p = fit.params;
        match i {
            0 => p.alpha *= s,
            1 => p.beta *= s,
            2 => p.gamma *= s,
            3 => p.delta *= s,
            _ => p.trap_capacity *= s,
        }
        p
    };
    for i in 0..5 {
        let slope = (cost(&nudge(i, 1.0 + 1e-4)) - cost(&nudge(i, 1.0 - 1e-4))) / 2e-4;
        assert!(slope.abs() / base < 1e-3, "parameter {i}: relative slope {}", slope / base);
    }
}

#[test]
fn all_neutral_data_keeps_feeding_rates_at_zero() {
    let powers = up_down(&log_powers(0.1, 2.0, 4));
    let curve = PowerCurve::new(powers.clone(), vec![0.0; powers.len()], 5.0).unwrap();
    let init = KineticParams { alpha: 0.3, beta: 0.0, gamma: 0.0, ..KineticParams::default() };
    let fit = fit_power_curve(&curve, &init, &ParamBounds::default(), &FitOptions::default()).unwrap();
    assert!(fit.params.beta < 1e-12 && fit.params.gamma < 1e-12);
    assert!(fit.residual_rms < 1e-12);
}

#[test]
fn fit_needs_five_points() {
    let curve = PowerCurve::new(vec![0.1, 0.2, 0.3, 0.4], vec![0.1; 4], 1.0).unwrap();
    let r = fit_power_curve(&curve, &KineticParams::default(), &ParamBounds::default(), &FitOptions::default());
    assert!(matches!(r, Err(nvcharge::Error::Domain(_))));
}

#[test]
fn fit_rejects_init_outside_bounds() {
    let curve = synthetic_curve(&KineticParams::default(), 10.0);
    let bounds = ParamBounds { upper: [0.1, 1.0, 10.0, 1.0, 1e3], ..ParamBounds::default() };
    let r = fit_power_curve(&curve, &KineticParams::default(), &bounds, &FitOptions::default());
    assert!(r.is_err());
}

#[test]
fn fixed_parameter_stays_put() {
    let truth = KineticParams::default();
    let curve = synthetic_curve(&truth, 10.0);
    let mut init = perturbed(&truth);
    init.trap_capacity = truth.trap_capacity;
    let mut bounds = ParamBounds::default();
    bounds.lower[4] = truth.trap_capacity;
    bounds.upper[4] = truth.trap_capacity;
    let fit = fit_power_curve(&curve, &init, &bounds, &FitOptions::default()).unwrap();
    assert_eq!(fit.params.trap_capacity, truth.trap_capacity);
    assert!(relative_errors(&fit.params, &truth).iter().all(|e| *e < 0.05));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn populations_stay_physical(
        alpha in 1e-3f64..2.0,
        beta in 0.0f64..0.5,
        gamma in 0.0f64..3.0,
        delta in 1e-4f64..1.0,
        cap in 0.1f64..100.0,
        m0 in 0.0f64..1.0,
        t0 in 0.0f64..1.0,
        seq in prop::collection::vec(0.01f64..20.0, 1..8),
    ) {
        let params = KineticParams { alpha, beta, gamma, delta, trap_capacity: cap, ..KineticParams::default() };
        let start = ChargeState::new(m0, t0 * cap);
        let traj = simulate_sweep(&seq, 5.0, &params, start, Tolerances::default()).unwrap();
        for (m, t) in traj.fractions.iter().zip(&traj.traps) {
            prop_assert!((0.0..=1.0).contains(m));
            prop_assert!((m + (1.0 - m) - 1.0).abs() < 1e-9);
            prop_assert!(*t >= 0.0 && *t <= cap);
        }
    }

    #[test]
    fn steady_state_is_stationary(
        alpha in 1e-3f64..2.0,
        beta in 0.0f64..0.5,
        gamma in 0.0f64..3.0,
        delta in 0.0f64..1.0,
        cap in 0.1f64..500.0,
        power in 0.01f64..50.0,
    ) {
        let params = KineticParams { alpha, beta, gamma, delta, trap_capacity: cap, ..KineticParams::default() };
        let s = steady_state(power, &params).unwrap();
        let rhs = params.rates(power).rhs(&[s.nv_minus, s.traps]);
        let scale = 1.0 + params.rates(power).ionization + params.rates(power).transfer * cap;
        prop_assert!(rhs[0].hypot(rhs[1]) < 1e-10 * scale);
        prop_assert!((0.0..=1.0).contains(&s.nv_minus));
    }
}
