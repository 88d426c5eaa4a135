//! Linearly implicit Euler with polynomial extrapolation (the scheme behind
//! SEULEX), specialized to two-component autonomous systems.
//!
//! Each macro step of size H runs the linearly implicit Euler method with
//! n = 1..=K substeps, all sharing one Jacobian evaluated at the step start,
//! and extrapolates the results to zero step size. The difference between
//! the two highest tableau entries drives the step-size controller.

use crate::error::{Error, Result};

pub type State = [f64; 2];
pub type Jacobian = [[f64; 2]; 2];

const STAGES: usize = 6;
const MAX_STEPS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

fn solve2(m: &Jacobian, b: State) -> Option<State> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Integrates `y' = rhs(y)` from `y0` over `duration`.
///
/// `project` is applied to every accepted state (e.g. to clip round-off
/// excursions outside the physical domain).
pub fn integrate<F, J, P>(
    rhs: F,
    jacobian: J,
    project: P,
    y0: State,
    duration: f64,
    tol: Tolerances,
) -> Result<(State, Stats)>
where
    F: Fn(&State) -> State,
    J: Fn(&State) -> Jacobian,
    P: Fn(State) -> State,
{
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::Domain(format!("integration time {duration} is not valid")));
    }
    let mut y = y0;
    let mut t = 0.0;
    let mut stats = Stats::default();
    if duration == 0.0 {
        return Ok((y, stats));
    }

    // Initial step from the local rate scale.
    let f0 = rhs(&y);
    let rate = (0..2)
        .map(|i| f0[i].abs() / (tol.atol + tol.rtol * y[i].abs()).max(1e-300))
        .fold(0.0f64, f64::max);
    let mut h = if rate > 0.0 { (0.1 / rate.sqrt()).min(duration) } else { duration };
    h = h.max(duration * 1e-12);

    while t < duration {
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(Error::Numeric(format!(
                "step budget exhausted at t = {t:e} of {duration:e}"
            )));
        }
        let last = t + h >= duration;
        let step = if last { duration - t } else { h };
        let jac = jacobian(&y);

        let mut table = [[[0.0f64; 2]; STAGES]; STAGES];
        let mut ok = true;
        'stages: for j in 0..STAGES {
            let n = (j + 1) as f64;
            let hs = step / n;
            let mut m = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] = if r == c { 1.0 } else { 0.0 } - hs * jac[r][c];
                }
            }
            let mut yy = y;
            for _ in 0..(j + 1) {
                let f = rhs(&yy);
                let Some(d) = solve2(&m, [hs * f[0], hs * f[1]]) else {
                    ok = false;
                    break 'stages;
                };
                yy = [yy[0] + d[0], yy[1] + d[1]];
            }
            table[j][0] = yy;
            for k in 1..=j {
                let ratio = (j + 1) as f64 / (j + 1 - k) as f64 - 1.0;
                for i in 0..2 {
                    table[j][k][i] = table[j][k - 1][i] + (table[j][k - 1][i] - table[j - 1][k - 1][i]) / ratio;
                }
            }
        }

        let mut err = f64::INFINITY;
        let candidate = table[STAGES - 1][STAGES - 1];
        if ok && candidate.iter().all(|v| v.is_finite()) {
            let lower = table[STAGES - 1][STAGES - 2];
            err = (0..2)
                .map(|i| {
                    let sc = tol.atol + tol.rtol * y[i].abs().max(candidate[i].abs());
                    (candidate[i] - lower[i]).abs() / sc
                })
                .fold(0.0f64, f64::max);
        }

        let order = (STAGES - 1) as f64;
        if err <= 1.0 {
            y = project(candidate);
            t = if last { duration } else { t + step };
            stats.accepted += 1;
            let grow = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / order)).min(4.0) };
            h = step * grow;
        } else {
            stats.rejected += 1;
            let shrink = if err.is_finite() { (0.9 * err.powf(-1.0 / order)).max(0.1) } else { 0.1 };
            h = step * shrink;
            if h < duration * 1e-14 {
                return Err(Error::Numeric(format!("step size underflow at t = {t:e}")));
            }
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let k = 3.0;
        let (y, _) = integrate(
            |y| [-k * y[0], -0.5 * y[1]],
            |_| [[-k, 0.0], [0.0, -0.5]],
            |y| y,
            [1.0, 2.0],
            2.0,
            Tolerances::default(),
        )
        .unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-9);
        assert!((y[1] - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn stiff_linear_system() {
        // Eigenvalues -1 and -1e6; exact solution known in closed form.
        let (l1, l2) = (-1.0, -1e6);
        let (y, stats) = integrate(
            |y| [l1 * y[0] + y[1], l2 * y[1]],
            |_| [[l1, 1.0], [0.0, l2]],
            |y| y,
            [1.0, 1.0],
            5.0,
            Tolerances::default(),
        )
        .unwrap();
        let c = 1.0 / (l2 - l1);
        let exact0 = (1.0 - c) * (l1 * 5.0f64).exp() + c * (l2 * 5.0f64).exp();
        assert!((y[0] - exact0).abs() < 1e-7 * exact0.abs(), "{} {}", y[0], exact0);
        assert!(y[1].abs() < 1e-12);
        assert!(stats.accepted < 500, "{stats:?}");
    }

    #[test]
    fn logistic_growth() {
        let (y, _) = integrate(
            |y| [y[0] * (1.0 - y[0]), 0.0],
            |y| [[1.0 - 2.0 * y[0], 0.0], [0.0, 0.0]],
            |y| y,
            [0.01, 0.0],
            8.0,
            Tolerances::default(),
        )
        .unwrap();
        let exact = 1.0 / (1.0 + 99.0 * (-8.0f64).exp());
        assert!((y[0] - exact).abs() < 1e-8);
    }

    #[test]
    fn zero_duration_is_identity() {
        let (y, s) = integrate(|_| [1.0, 1.0], |_| [[0.0; 2]; 2], |y| y, [0.3, 0.4], 0.0, Tolerances::default()).unwrap();
        assert_eq!(y, [0.3, 0.4]);
        assert_eq!(s.accepted, 0);
    }
}
