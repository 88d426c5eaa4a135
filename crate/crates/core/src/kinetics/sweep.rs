use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::integrator::{integrate, Tolerances};
use super::model::{ChargeState, KineticParams};
use crate::error::{domain, Error, Result};

/// CSV header of power-curve files.
pub const POWER_CURVE_HEADER: &str = "power_mw,nv_minus_fraction";

/// Measured NV⁻ fraction versus laser power, in acquisition order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub powers: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Seconds spent at each power.
    pub dwell: f64,
}

impl PowerCurve {
    pub fn new(powers: Vec<f64>, fractions: Vec<f64>, dwell: f64) -> Result<Self> {
        if powers.len() != fractions.len() {
            return domain(format!("{} powers but {} fractions", powers.len(), fractions.len()));
        }
        if powers.is_empty() {
            return domain("power curve is empty");
        }
        if powers.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return domain("laser powers must be positive");
        }
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return domain("fractions must lie in [0, 1]");
        }
        if !(dwell.is_finite() && dwell > 0.0) {
            return domain(format!("dwell time must be positive, got {dwell}"));
        }
        Ok(Self { powers, fractions, dwell })
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// Reads `power_mw,nv_minus_fraction` rows, keeping their order.
pub fn load_power_curve<R: BufRead>(reader: R, dwell: f64) -> Result<PowerCurve> {
    let mut powers = Vec::new();
    let mut fractions = Vec::new();
    let mut seen_data = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if !seen_data && fields == ["power_mw", "nv_minus_fraction"] {
            continue;
        }
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("`{s}` is not a finite number"),
            })
        };
        let p = parse(fields[0])?;
        let f = parse(fields[1])?;
        if p <= 0.0 {
            return Err(Error::Parse { line: line_no, message: format!("power {p} must be positive") });
        }
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Parse { line: line_no, message: format!("fraction {f} outside [0, 1]") });
        }
        powers.push(p);
        fractions.push(f);
        seen_data = true;
    }
    if powers.is_empty() {
        return Err(Error::Parse { line: 0, message: "no data rows".into() });
    }
    PowerCurve::new(powers, fractions, dwell)
}

pub fn write_power_curve<W: Write>(mut out: W, curve: &PowerCurve) -> std::io::Result<()> {
    writeln!(out, "{POWER_CURVE_HEADER}")?;
    for (p, f) in curve.powers.iter().zip(&curve.fractions) {
        writeln!(out, "{p},{f}")?;
    }
    Ok(())
}

/// State at the end of every dwell period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTrajectory {
    pub fractions: Vec<f64>,
    pub traps: Vec<f64>,
}

impl SweepTrajectory {
    pub fn final_state(&self) -> Option<ChargeState> {
        Some(ChargeState::new(*self.fractions.last()?, *self.traps.last()?))
    }
}

/// Integrates the rate system through `powers`, holding each for `dwell`
/// seconds and carrying the state over between steps.
pub fn simulate_sweep(
    powers: &[f64],
    dwell: f64,
    params: &KineticParams,
    initial: ChargeState,
    tol: Tolerances,
) -> Result<SweepTrajectory> {
    params.validate()?;
    if powers.is_empty() {
        return domain("power sequence is empty");
    }
    if powers.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return domain("laser powers must be positive");
    }
    if !(dwell.is_finite() && dwell > 0.0) {
        return domain(format!("dwell time must be positive, got {dwell}"));
    }
    if !(0.0..=1.0).contains(&initial.nv_minus) || !(0.0..=params.trap_capacity).contains(&initial.traps) {
        return domain("initial state outside 0 ≤ NV⁻ ≤ 1, 0 ≤ traps ≤ capacity");
    }

    let mut y = initial.to_array();
    let mut fractions = Vec::with_capacity(powers.len());
    let mut traps = Vec::with_capacity(powers.len());
    for (step, &p) in powers.iter().enumerate() {
        let rates = params.rates(p);
        let (next, _) = integrate(
            |y| rates.rhs(y),
            |y| rates.jacobian(y),
            |y| rates.project(y),
            y,
            dwell,
            tol,
        )
        .map_err(|e| Error::Numeric(format!("sweep step {step} at {p} mW: {e}")))?;
        y = next;
        fractions.push(y[0]);
        traps.push(y[1]);
    }
    Ok(SweepTrajectory { fractions, traps })
}

/// Relaxes `initial` at constant `power` for `duration` seconds.
pub fn evolve(
    power: f64,
    duration: f64,
    params: &KineticParams,
    initial: ChargeState,
    tol: Tolerances,
) -> Result<ChargeState> {
    let t = simulate_sweep(&[power], duration, params, initial, tol)?;
    Ok(t.final_state().expect("one step"))
}

/// Signed area enclosed by the (power, fraction) path, closed back to its
/// first point. Positive when the later (descending) branch lies above the
/// earlier one. `None` for monotone power sequences.
pub fn hysteresis_area(powers: &[f64], fractions: &[f64]) -> Option<f64> {
    let n = powers.len().min(fractions.len());
    if n < 3 {
        return None;
    }
    let up = powers.windows(2).all(|w| w[1] >= w[0]);
    let down = powers.windows(2).all(|w| w[1] <= w[0]);
    if up || down {
        return None;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            powers[i] * fractions[j] - powers[j] * fractions[i]
        })
        .sum();
    Some(0.5 * twice)
}
