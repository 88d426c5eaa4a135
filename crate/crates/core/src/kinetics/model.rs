//! Three-state charge model: NV⁻, NV⁰ and a reservoir of electron traps.
//!
//! With m = [NV⁻], z = 1 − m and T the filled-trap population (in units of
//! the NV population, 0 ≤ T ≤ C):
//!
//! ```text
//! dm/dt = β Pᵇ z + γ Pᵍ T z − α Pᵃ m
//! dT/dt = α Pᵃ m (1 − T/C) − γ Pᵍ T z − δ T
//! ```
//!
//! Photoionization of NV⁻ parks the ejected electron in an empty trap,
//! light-assisted transfer hands trapped electrons back to NV⁰, and traps
//! empty in the dark at rate δ.

use serde::{Deserialize, Serialize};

use super::integrator::{Jacobian, State};
use crate::error::{domain, Error, Result};

/// Power-law exponents of the three light-driven channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerExponents {
    pub ionization: f64,
    pub recombination: f64,
    pub transfer: f64,
}

impl Default for PowerExponents {
    /// Two-photon ionization and recombination, one-photon transfer.
    fn default() -> Self {
        Self {
            ionization: 2.0,
            recombination: 2.0,
            transfer: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    /// Ionization, s⁻¹·mW⁻².
    pub alpha: f64,
    /// Recombination, s⁻¹·mW⁻².
    pub beta: f64,
    /// Trap → NV⁰ transfer, s⁻¹·mW⁻¹.
    pub gamma: f64,
    /// Dark trap release, s⁻¹.
    pub delta: f64,
    pub trap_capacity: f64,
    #[serde(default)]
    pub exponents: PowerExponents,
}

impl Default for KineticParams {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            beta: 0.02,
            gamma: 1.0,
            delta: 0.05,
            trap_capacity: 200.0,
            exponents: PowerExponents::default(),
        }
    }
}

impl KineticParams {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.alpha, self.beta, self.gamma, self.delta];
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return domain("rate coefficients must be finite and non-negative");
        }
        if !(self.trap_capacity.is_finite() && self.trap_capacity > 0.0) {
            return domain("trap capacity must be positive");
        }
        let e = self.exponents;
        if [e.ionization, e.recombination, e.transfer].iter().any(|x| !x.is_finite()) {
            return domain("power exponents must be finite");
        }
        Ok(())
    }

    pub(crate) fn as_array(&self) -> [f64; 5] {
        [self.alpha, self.beta, self.gamma, self.delta, self.trap_capacity]
    }

    pub(crate) fn with_array(&self, v: [f64; 5]) -> Self {
        Self {
            alpha: v[0],
            beta: v[1],
            gamma: v[2],
            delta: v[3],
            trap_capacity: v[4],
            exponents: self.exponents,
        }
    }

    /// Channel rates at `power`.
    pub fn rates(&self, power: f64) -> Rates {
        let e = self.exponents;
        Rates {
            ionization: self.alpha * power.powf(e.ionization),
            recombination: self.beta * power.powf(e.recombination),
            transfer: self.gamma * power.powf(e.transfer),
            release: self.delta,
            capacity: self.trap_capacity,
        }
    }
}

/// Rate constants at a fixed laser power, s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub ionization: f64,
    pub recombination: f64,
    pub transfer: f64,
    pub release: f64,
    pub capacity: f64,
}

/// NV⁻ fraction and filled-trap population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeState {
    pub nv_minus: f64,
    pub traps: f64,
}

impl ChargeState {
    pub fn new(nv_minus: f64, traps: f64) -> Self {
        Self { nv_minus, traps }
    }

    pub(crate) fn to_array(self) -> State {
        [self.nv_minus, self.traps]
    }
}

impl Rates {
    pub fn rhs(&self, y: &State) -> State {
        let (m, t) = (y[0], y[1]);
        let z = 1.0 - m;
        let transfer = self.transfer * t * z;
        let ionized = self.ionization * m;
        [
            self.recombination * z + transfer - ionized,
            ionized * (1.0 - t / self.capacity) - transfer - self.release * t,
        ]
    }

    pub fn jacobian(&self, y: &State) -> Jacobian {
        let (m, t) = (y[0], y[1]);
        let z = 1.0 - m;
        let (a, b, g, d, c) = (self.ionization, self.recombination, self.transfer, self.release, self.capacity);
        [
            [-b - g * t - a, g * z],
            [a * (1.0 - t / c) + g * t, -a * m / c - g * z - d],
        ]
    }

    /// Clips round-off excursions back into 0 ≤ m ≤ 1, 0 ≤ T ≤ C.
    pub fn project(&self, y: State) -> State {
        [y[0].clamp(0.0, 1.0), y[1].clamp(0.0, self.capacity)]
    }

    /// Stationary state in closed form.
    ///
    /// The trap balance gives T(m) = a m / (a m / C + g z + δ). Substituting
    /// into the NV balance and clearing the denominator leaves a quadratic
    /// in m with F(0) ≥ 0 ≥ F(1) and exactly one root in [0, 1].
    pub fn steady_state(&self) -> Result<ChargeState> {
        let (a, b, g, d, c) = (self.ionization, self.recombination, self.transfer, self.release, self.capacity);
        if a + b <= 0.0 {
            return Err(Error::Indeterminate(
                "ionization and recombination both vanish; the charge state is set by history".into(),
            ));
        }
        if g + d <= 0.0 {
            // Traps never empty: they saturate whenever anything ionizes.
            let m = b / (a + b);
            let t = if a > 0.0 { c } else { 0.0 };
            return Ok(ChargeState::new(m, t));
        }

        let qa = -(a + b) * (a / c - g) - g * a;
        let qb = b * (a / c - g) - (a + b) * (d + g) + g * a;
        let qc = b * (d + g);
        let f = |m: f64| (qa * m + qb) * m + qc;

        let m = if qc == 0.0 {
            // b = 0: m = 0 is the root on [0, 1].
            0.0
        } else {
            let scale = qa.abs().max(qb.abs()).max(qc.abs());
            let root = if qa.abs() <= 1e-14 * scale {
                -qc / qb
            } else {
                let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                let q = -0.5 * (qb + qb.signum() * disc.sqrt());
                let r1 = q / qa;
                let r2 = qc / q;
                let inside = |r: f64| (-1e-12..=1.0 + 1e-12).contains(&r);
                match (inside(r1), inside(r2)) {
                    (true, false) => r1,
                    (false, true) => r2,
                    _ => {
                        if f(r1).abs() <= f(r2).abs() { r1 } else { r2 }
                    }
                }
            };
            root.clamp(0.0, 1.0)
        };

        let denom = a * m / c + g * (1.0 - m) + d;
        let t = if denom > 0.0 { (a * m / denom).min(c) } else { 0.0 };
        Ok(ChargeState::new(m, t))
    }

    /// Slowest relaxation rate of the linearized dynamics at `state`, s⁻¹.
    pub fn slowest_rate(&self, state: ChargeState) -> f64 {
        let j = self.jacobian(&state.to_array());
        let tr = j[0][0] + j[1][1];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let l1 = 0.5 * (tr + s);
            let l2 = 0.5 * (tr - s);
            l1.abs().min(l2.abs())
        } else {
            0.5 * tr.abs()
        }
    }
}

/// Stationary NV⁻ fraction at `power` (mW).
pub fn steady_state_fraction(power: f64, params: &KineticParams) -> Result<f64> {
    Ok(steady_state(power, params)?.nv_minus)
}

/// Stationary NV⁻ fraction and trap population at `power` (mW).
pub fn steady_state(power: f64, params: &KineticParams) -> Result<ChargeState> {
    params.validate()?;
    if !(power.is_finite() && power > 0.0) {
        return domain(format!("laser power must be positive, got {power} mW"));
    }
    if params.alpha + params.beta == 0.0 {
        return Err(Error::Indeterminate(
            "alpha and beta are both zero; the stationary state depends on history".into(),
        ));
    }
    params.rates(power).steady_state()
}
