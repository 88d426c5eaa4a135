//! Bounded Levenberg-Marquardt fit of rate coefficients to a power curve.
//!
//! Residuals are `simulate_sweep(curve) − measured`, evaluated in the order
//! the curve was acquired, so the memory of earlier powers enters the fit.
//! Sensitivities come from finite differences of the full simulation.

use nalgebra::{DMatrix, DVector, Matrix5};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::integrator::Tolerances;
use super::model::{steady_state, ChargeState, KineticParams};
use super::sweep::{hysteresis_area, simulate_sweep, PowerCurve};
use crate::error::{domain, Error, Result};

/// Number of fitted coefficients: α, β, γ, δ, trap capacity.
pub const N_PARAMS: usize = 5;

pub const PARAM_NAMES: [&str; N_PARAMS] = ["alpha", "beta", "gamma", "delta", "trap_capacity"];

/// Box constraints, ordered as [`PARAM_NAMES`]. A parameter whose lower
/// and upper bounds coincide is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: [f64; N_PARAMS],
    pub upper: [f64; N_PARAMS],
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            lower: [0.0, 0.0, 0.0, 0.0, 1e-6],
            upper: [f64::INFINITY; N_PARAMS],
        }
    }
}

impl ParamBounds {
    pub fn validate(&self) -> Result<()> {
        for i in 0..N_PARAMS {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return domain(format!("bounds for {} are inconsistent", PARAM_NAMES[i]));
            }
            if lo < 0.0 {
                return domain(format!("lower bound for {} must be non-negative", PARAM_NAMES[i]));
            }
        }
        if self.lower[4] <= 0.0 && self.upper[4] <= 0.0 {
            return domain("trap capacity must be allowed to be positive");
        }
        Ok(())
    }

    fn contains(&self, x: &[f64; N_PARAMS]) -> bool {
        (0..N_PARAMS).all(|i| x[i] >= self.lower[i] && x[i] <= self.upper[i])
    }

    fn is_fixed(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }
}

/// State of the sample before the first point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum InitialCondition {
    /// Equilibrated at the first power with the parameters being tried.
    #[default]
    SteadyState,
    Fixed(ChargeState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Threshold on the largest cosine between the residual vector and a
    /// Jacobian column.
    pub gtol: f64,
    /// Relative cost reduction below which progress counts as stalled.
    pub ftol: f64,
    /// Relative parameter step below which the iteration stops.
    pub xtol: f64,
    pub initial: InitialCondition,
    /// Integration tolerances used while fitting; tighter than the sweep
    /// default so finite differences stay clean.
    pub tolerances: Tolerances,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gtol: 1e-6,
            ftol: 1e-12,
            xtol: 1e-10,
            initial: InitialCondition::SteadyState,
            tolerances: Tolerances { rtol: 1e-11, atol: 1e-14 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticFit {
    pub params: KineticParams,
    pub residual_rms: f64,
    /// Parameter covariance, rows and columns ordered as [`PARAM_NAMES`];
    /// absent when the Jacobian is rank deficient or there are no spare
    /// degrees of freedom.
    pub covariance: Option<[[f64; N_PARAMS]; N_PARAMS]>,
    /// Simulated fractions at the fitted parameters.
    pub model: Vec<f64>,
    /// Loop area of the fitted trajectory, for non-monotone sequences.
    pub hysteresis_area: Option<f64>,
    /// Largest residual/Jacobian-column cosine at the returned point,
    /// ignoring columns blocked by an active bound.
    pub gradient_measure: f64,
    pub iterations: usize,
    pub converged: bool,
    pub ill_conditioned: bool,
}

struct Problem<'a> {
    curve: &'a PowerCurve,
    template: KineticParams,
    opts: FitOptions,
}

impl Problem<'_> {
    fn params(&self, x: &[f64; N_PARAMS]) -> KineticParams {
        self.template.with_array(*x)
    }

    fn simulate(&self, x: &[f64; N_PARAMS]) -> Result<Vec<f64>> {
        let p = self.params(x);
        let start = match self.opts.initial {
            InitialCondition::SteadyState => steady_state(self.curve.powers[0], &p)?,
            InitialCondition::Fixed(s) => s,
        };
        let traj = simulate_sweep(&self.curve.powers, self.curve.dwell, &p, start, self.opts.tolerances)?;
        Ok(traj.fractions)
    }

    fn residuals(&self, x: &[f64; N_PARAMS]) -> Result<Vec<f64>> {
        let sim = self.simulate(x)?;
        Ok(sim.iter().zip(&self.curve.fractions).map(|(s, m)| s - m).collect())
    }
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Finite-difference Jacobian, one column per parameter. Central where the
/// bounds allow it, one-sided at a bound, zero for fixed parameters.
fn jacobian(
    problem: &Problem,
    x: &[f64; N_PARAMS],
    r0: &[f64],
    bounds: &ParamBounds,
    scale: &[f64; N_PARAMS],
) -> Result<DMatrix<f64>> {
    let n = r0.len();
    let columns: Vec<Result<Vec<f64>>> = (0..N_PARAMS)
        .into_par_iter()
        .map(|i| {
            if bounds.is_fixed(i) {
                return Ok(vec![0.0; n]);
            }
            let h = 1e-4 * x[i].abs().max(scale[i]);
            let up_ok = x[i] + h <= bounds.upper[i];
            let down_ok = x[i] - h >= bounds.lower[i];
            let shifted = |dx: f64| {
                let mut y = *x;
                y[i] += dx;
                problem.residuals(&y)
            };
            Ok(match (up_ok, down_ok) {
                (true, true) => {
                    let (rp, rm) = (shifted(h)?, shifted(-h)?);
                    rp.iter().zip(&rm).map(|(p, m)| (p - m) / (2.0 * h)).collect()
                }
                (true, false) => {
                    let rp = shifted(h)?;
                    rp.iter().zip(r0).map(|(p, c)| (p - c) / h).collect()
                }
                (false, true) => {
                    let rm = shifted(-h)?;
                    r0.iter().zip(&rm).map(|(c, m)| (c - m) / h).collect()
                }
                (false, false) => vec![0.0; n],
            })
        })
        .collect();
    let mut j = DMatrix::zeros(n, N_PARAMS);
    for (i, col) in columns.into_iter().enumerate() {
        j.set_column(i, &DVector::from_vec(col?));
    }
    Ok(j)
}

/// Indices whose descent direction points out of the feasible box.
fn blocked(x: &[f64; N_PARAMS], grad: &DVector<f64>, bounds: &ParamBounds) -> [bool; N_PARAMS] {
    std::array::from_fn(|i| {
        bounds.is_fixed(i)
            || (x[i] <= bounds.lower[i] && grad[i] > 0.0)
            || (x[i] >= bounds.upper[i] && grad[i] < 0.0)
    })
}

fn gradient_measure(j: &DMatrix<f64>, r: &[f64], skip: &[bool; N_PARAMS]) -> f64 {
    let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rnorm == 0.0 {
        return 0.0;
    }
    let rv = DVector::from_column_slice(r);
    (0..N_PARAMS)
        .filter(|&i| !skip[i])
        .map(|i| {
            let col = j.column(i);
            let cn = col.norm();
            if cn == 0.0 {
                0.0
            } else {
                col.dot(&rv).abs() / (cn * rnorm)
            }
        })
        .fold(0.0, f64::max)
}

/// Solves the damped normal equations restricted to the free parameters.
fn damped_step(
    jtj: &Matrix5<f64>,
    grad: &DVector<f64>,
    lambda: f64,
    free: &[bool; N_PARAMS],
) -> Option<[f64; N_PARAMS]> {
    let idx: Vec<usize> = (0..N_PARAMS).filter(|&i| free[i]).collect();
    let k = idx.len();
    if k == 0 {
        return None;
    }
    let max_diag = idx.iter().map(|&i| jtj[(i, i)]).fold(0.0, f64::max);
    let floor = if max_diag > 0.0 { max_diag * 1e-14 } else { 1.0 };
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    for (p, &i) in idx.iter().enumerate() {
        for (q, &jx) in idx.iter().enumerate() {
            a[(p, q)] = jtj[(i, jx)];
        }
        a[(p, p)] += lambda * jtj[(i, i)].max(floor);
        b[p] = -grad[i];
    }
    let sol = a.cholesky()?.solve(&b);
    let mut step = [0.0; N_PARAMS];
    for (p, &i) in idx.iter().enumerate() {
        step[i] = sol[p];
    }
    Some(step)
}

fn covariance(
    jtj: &Matrix5<f64>,
    half_ssr: f64,
    n: usize,
    fixed: &[bool; N_PARAMS],
) -> Option<[[f64; N_PARAMS]; N_PARAMS]> {
    let idx: Vec<usize> = (0..N_PARAMS).filter(|&i| !fixed[i]).collect();
    let k = idx.len();
    if n <= k || k == 0 {
        return None;
    }
    let sub = DMatrix::from_fn(k, k, |p, q| jtj[(idx[p], idx[q])]);
    let svd = sub.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-12 {
        return None;
    }
    let inv = sub.try_inverse()?;
    let s2 = 2.0 * half_ssr / (n - k) as f64;
    let mut out = [[0.0; N_PARAMS]; N_PARAMS];
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            out[i][j] = s2 * inv[(p, q)];
        }
    }
    Some(out)
}

/// Fits α, β, γ, δ and the trap capacity to `curve`, starting from `init`.
///
/// Returns the best point found. `converged` is false when the iteration
/// budget ran out first; `ill_conditioned` flags a rank-deficient
/// Jacobian, in which case no covariance is reported.
pub fn fit_power_curve(
    curve: &PowerCurve,
    init: &KineticParams,
    bounds: &ParamBounds,
    opts: &FitOptions,
) -> Result<KineticFit> {
    if curve.len() < 5 {
        return domain(format!("at least 5 points are needed to fit, got {}", curve.len()));
    }
    init.validate()?;
    bounds.validate()?;
    let mut x = init.as_array();
    if !bounds.contains(&x) {
        return domain("initial parameters lie outside the bounds");
    }
    let problem = Problem { curve, template: *init, opts: *opts };
    let fixed: [bool; N_PARAMS] = std::array::from_fn(|i| bounds.is_fixed(i));
    // Finite-difference and step-size floor for each parameter.
    let scale: [f64; N_PARAMS] = std::array::from_fn(|i| {
        let s = x[i].abs().max(bounds.lower[i]);
        if s > 0.0 {
            s
        } else {
            1e-6
        }
    });

    let mut r = problem
        .residuals(&x)
        .map_err(|e| Error::Numeric(format!("model fails at the initial parameters: {e}")))?;
    let mut f = cost(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    let (mut j, mut jtj, mut grad);
    loop {
        j = jacobian(&problem, &x, &r, bounds, &scale)?;
        jtj = Matrix5::from_iterator((j.transpose() * &j).iter().copied());
        grad = j.transpose() * DVector::from_column_slice(&r);
        let skip = blocked(&x, &grad, bounds);
        if f == 0.0 || gradient_measure(&j, &r, &skip) <= opts.gtol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut free: [bool; N_PARAMS] = std::array::from_fn(|i| !skip[i]);
        let mut accepted = false;
        let mut stalled = false;
        for _ in 0..40 {
            let Some(mut step) = damped_step(&jtj, &grad, lambda, &free) else {
                lambda *= 10.0;
                continue;
            };
            // A parameter sitting on a bound that the step would push
            // through is frozen and the step recomputed.
            let mut refreeze = false;
            for i in 0..N_PARAMS {
                if free[i]
                    && ((x[i] <= bounds.lower[i] && step[i] < 0.0)
                        || (x[i] >= bounds.upper[i] && step[i] > 0.0))
                {
                    free[i] = false;
                    refreeze = true;
                }
            }
            if refreeze {
                if free.iter().any(|&b| b) {
                    continue;
                }
                stalled = true;
                break;
            }
            let mut trial = x;
            for i in 0..N_PARAMS {
                trial[i] = (x[i] + step[i]).clamp(bounds.lower[i], bounds.upper[i]);
                step[i] = trial[i] - x[i];
            }
            let rel_step = (0..N_PARAMS)
                .map(|i| step[i].abs() / x[i].abs().max(scale[i]))
                .fold(0.0, f64::max);
            let trial_f = problem.residuals(&trial).map(|rt| (cost(&rt), rt));
            match trial_f {
                Ok((tf, rt)) if tf < f => {
                    let reduction = (f - tf) / f;
                    x = trial;
                    r = rt;
                    f = tf;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if reduction < opts.ftol || rel_step < opts.xtol {
                        stalled = true;
                    }
                    break;
                }
                _ => {
                    if rel_step < opts.xtol {
                        stalled = true;
                        break;
                    }
                    lambda *= 4.0;
                }
            }
        }
        if stalled || !accepted {
            j = jacobian(&problem, &x, &r, bounds, &scale)?;
            jtj = Matrix5::from_iterator((j.transpose() * &j).iter().copied());
            grad = j.transpose() * DVector::from_column_slice(&r);
            converged = stalled;
            break;
        }
    }

    let skip = blocked(&x, &grad, bounds);
    let gm = gradient_measure(&j, &r, &skip);
    let ssr = 2.0 * f;
    let cov = covariance(&jtj, f, r.len(), &fixed);
    let model: Vec<f64> = r.iter().zip(&curve.fractions).map(|(ri, m)| ri + m).collect();
    Ok(KineticFit {
        params: problem.params(&x),
        residual_rms: (ssr / r.len() as f64).sqrt(),
        covariance: cov,
        hysteresis_area: hysteresis_area(&curve.powers, &model),
        model,
        gradient_measure: gm,
        iterations,
        converged: converged || gm <= opts.gtol,
        ill_conditioned: cov.is_none() && r.len() > fixed.iter().filter(|f| !**f).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validation() {
        assert!(ParamBounds::default().validate().is_ok());
        let mut b = ParamBounds::default();
        b.lower[1] = -1.0;
        assert!(b.validate().is_err());
        b.lower[1] = 2.0;
        b.upper[1] = 1.0;
        assert!(b.validate().is_err());
    }

    #[test]
    fn descent_into_a_bound_is_blocked() {
        let b = ParamBounds::default();
        let x = [0.0, 0.5, 0.0, 1.0, 1.0];
        let g = DVector::from_vec(vec![1.0, 1.0, -1.0, 0.0, 0.0]);
        assert_eq!(blocked(&x, &g, &b), [true, false, false, false, false]);
    }

    #[test]
    fn undamped_step_is_gauss_newton() {
        let jtj = Matrix5::from_diagonal(&nalgebra::Vector5::new(2.0, 4.0, 1.0, 1.0, 8.0));
        let g = DVector::from_vec(vec![2.0, -4.0, 0.0, 1.0, 8.0]);
        let step = damped_step(&jtj, &g, 0.0, &[true; N_PARAMS]).unwrap();
        let expected = [-1.0, 1.0, 0.0, -1.0, -1.0];
        for (s, e) in step.iter().zip(expected) {
            assert!((s - e).abs() < 1e-14, "{step:?}");
        }
        let partial = damped_step(&jtj, &g, 0.0, &[true, false, true, true, true]).unwrap();
        assert_eq!(partial[1], 0.0);
    }

    #[test]
    fn covariance_needs_spare_points() {
        let jtj = Matrix5::identity();
        assert!(covariance(&jtj, 1.0, 5, &[false; N_PARAMS]).is_none());
        let c = covariance(&jtj, 1.0, 7, &[false; N_PARAMS]).unwrap();
        assert_eq!(c[0][0], 1.0);
        let singular = Matrix5::from_diagonal(&nalgebra::Vector5::new(1.0, 1.0, 1.0, 1.0, 0.0));
        assert!(covariance(&singular, 1.0, 9, &[false; N_PARAMS]).is_none());
        assert!(covariance(&singular, 1.0, 9, &[false, false, false, false, true]).is_some());
    }
}
