//! Self-consistent band bending: an outer bisection on the Fermi level
//! enforces global neutrality, an inner damped Newton-linearized iteration
//! solves the nonlinear Poisson problem for each trial Fermi level.

use serde::{Deserialize, Serialize};

use super::charge::local_charge;
use super::grid::RadialGrid;
use super::material::MaterialParams;
use super::poisson::{coupling, flux_operator, net_charge, poisson_residual};
use super::surface::SurfaceModel;
use crate::error::{domain, Error, Result};
use crate::tridiag;

/// Iteration controls for [`solve_selfconsistent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Inner convergence: max |Δφ| per iteration, eV.
    pub tol_phi: f64,
    /// Fraction of the linearized update applied while far from the
    /// solution (|Δφ| > kT).
    pub mixing: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Bisection stops once the Fermi-level bracket is narrower than this, eV.
    pub tol_fermi: f64,
    /// Relative neutrality target |Q_net| / |Q_sheet|.
    pub tol_neutrality: f64,
    /// Largest band shift change allowed in one inner iteration, eV.
    pub max_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_phi: 1e-6,
            mixing: 0.3,
            max_inner: 500,
            max_outer: 100,
            tol_fermi: 1e-12,
            tol_neutrality: 1e-8,
            max_step: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_phi > 0.0 && self.tol_fermi > 0.0 && self.tol_neutrality > 0.0 && self.max_step > 0.0) {
            return domain("solver tolerances must be positive");
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return domain(format!("mixing factor {} must lie in (0, 1]", self.mixing));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return domain("iteration caps must be positive");
        }
        Ok(())
    }
}

/// Converged (or best-effort) band-bending solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    pub grid: RadialGrid,
    /// Rigid band-edge shift per node, eV; φ(R) = 0.
    pub phi: Vec<f64>,
    /// Fermi level, eV above the VBM of the unshifted (surface) bands.
    pub fermi_level: f64,
    /// Signed sheet charge, e·nm⁻² (negative when acceptors are filled).
    pub surface_sheet_charge: f64,
    /// Max-norm of the discrete Poisson residual, eV/nm².
    pub residual_norm: f64,
    /// Net particle charge in units of e.
    pub net_charge: f64,
    /// Bisection steps on the Fermi level.
    pub iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
}

impl BandProfile {
    /// Shifted NV⁻/⁰ level minus the Fermi level at each node.
    pub fn nv_level_offsets(&self, params: &MaterialParams) -> Vec<f64> {
        self.phi
            .iter()
            .map(|p| params.e_nv_transition + p - self.fermi_level)
            .collect()
    }

    /// Relative charge imbalance |Q_net| / |Q_sheet| (absolute when the
    /// sheet is empty).
    pub fn neutrality_error(&self) -> f64 {
        let sheet = 4.0 * std::f64::consts::PI * self.surface_sheet_charge.abs() * self.grid.radius().powi(2);
        if sheet > 0.0 {
            self.net_charge.abs() / sheet
        } else {
            self.net_charge.abs()
        }
    }
}

struct InnerResult {
    phi: Vec<f64>,
    iterations: usize,
    converged: bool,
}

struct Problem<'a> {
    params: &'a MaterialParams,
    grid: &'a RadialGrid,
    surface: &'a SurfaceModel,
    opts: &'a SolverOptions,
    k: f64,
    kt: f64,
    volumes: Vec<f64>,
    operator: (Vec<f64>, Vec<f64>, Vec<f64>),
}

impl<'a> Problem<'a> {
    fn new(
        params: &'a MaterialParams,
        grid: &'a RadialGrid,
        surface: &'a SurfaceModel,
        opts: &'a SolverOptions,
    ) -> Self {
        Self {
            params,
            grid,
            surface,
            opts,
            k: coupling(params.eps_r),
            kt: params.kt(),
            volumes: grid.cell_volumes(),
            operator: flux_operator(grid),
        }
    }

    /// Nonlinear Poisson solve at fixed Fermi level; φ(R) stays 0.
    fn inner(&self, fermi_level: f64, start: &[f64]) -> Result<InnerResult> {
        let m = self.grid.len() - 1;
        let (lower, diag0, upper) = &self.operator;
        let mut phi = start.to_vec();
        let mut diag = vec![0.0; m];
        let mut rhs = vec![0.0; m];

        for it in 1..=self.opts.max_inner {
            for i in 0..m {
                let lc = local_charge(phi[i], fermi_level, self.params);
                let mut flux = diag0[i] * phi[i];
                if i > 0 {
                    flux += lower[i - 1] * phi[i - 1];
                }
                // Upper coupling to the Dirichlet node vanishes since φ(R) = 0.
                if i + 1 < m {
                    flux += upper[i] * phi[i + 1];
                } else {
                    let h = self.grid.step();
                    flux += self.grid.face(i).powi(2) / h * phi[m];
                }
                rhs[i] = -(flux - self.k * self.volumes[i] * lc.rho);
                diag[i] = diag0[i] - self.k * self.volumes[i] * lc.drho_dphi;
            }
            let mut delta = tridiag::solve(lower, &diag, upper, &rhs)?;
            let largest = delta.iter().fold(0.0f64, |a, d| a.max(d.abs()));
            if !largest.is_finite() {
                return Err(Error::Numeric(format!(
                    "band update diverged at Fermi level {fermi_level} eV"
                )));
            }
            let damping = if largest > self.kt {
                self.opts.mixing * (self.opts.max_step / largest).min(1.0)
            } else {
                1.0
            };
            for d in delta.iter_mut() {
                *d *= damping;
            }
            for (p, d) in phi.iter_mut().zip(&delta) {
                *p += d;
            }
            if largest * damping < self.opts.tol_phi {
                return Ok(InnerResult {
                    phi,
                    iterations: it,
                    converged: true,
                });
            }
        }
        Ok(InnerResult {
            phi,
            iterations: self.opts.max_inner,
            converged: false,
        })
    }

    fn sheet(&self, phi: &[f64], fermi_level: f64) -> f64 {
        self.surface
            .sheet_charge(*phi.last().unwrap(), fermi_level, self.kt)
    }

    fn charge(&self, phi: &[f64], fermi_level: f64) -> (Vec<f64>, f64, f64) {
        let rho: Vec<f64> = phi
            .iter()
            .map(|&p| local_charge(p, fermi_level, self.params).rho)
            .collect();
        let sheet = self.sheet(phi, fermi_level);
        let q = net_charge(&rho, self.grid, sheet);
        (rho, sheet, q)
    }
}

/// Fermi level that neutralizes the unbent bulk on its own.
pub fn flat_band_fermi_level(params: &MaterialParams) -> Result<f64> {
    params.validate()?;
    let bulk = |ef: f64| local_charge(0.0, ef, params).rho;
    let (mut lo, mut hi) = (0.0, params.e_gap);
    // ρ decreases with E_F; holes win at the VBM, electrons at the CBM.
    while bulk(lo) < 0.0 {
        lo -= 0.5;
    }
    while bulk(hi) > 0.0 {
        hi += 0.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if bulk(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves for the band profile and Fermi level of a neutral particle whose
/// surface carries the acceptor layer `surface`.
pub fn solve_selfconsistent(
    params: &MaterialParams,
    grid: &RadialGrid,
    surface: &SurfaceModel,
    opts: &SolverOptions,
) -> Result<BandProfile> {
    params.validate()?;
    surface.validate(params.e_gap)?;
    opts.validate()?;

    let problem = Problem::new(params, grid, surface, opts);
    let sheet_scale = 4.0 * std::f64::consts::PI * surface.acceptor_density * grid.radius().powi(2);
    let neutral_enough = |q: f64| {
        if sheet_scale > 0.0 {
            q.abs() <= opts.tol_neutrality * sheet_scale
        } else {
            q.abs() <= opts.tol_neutrality
        }
    };

    let mut inner_total = 0;
    let mut outer = 0;
    let mut inner_ok;

    // Upper end: the flat-band level; acceptors can only pull E_F down.
    let ef_flat = flat_band_fermi_level(params)?;
    let flat = vec![0.0; grid.len()];
    let first = problem.inner(ef_flat, &flat)?;
    inner_total += first.iterations;
    inner_ok = first.converged;
    let (_, _, q_hi) = problem.charge(&first.phi, ef_flat);

    let mut best = (ef_flat, first.phi.clone(), q_hi, first.converged);

    if !neutral_enough(q_hi) {
        let mut hi = ef_flat;
        let mut phi_hi = first.phi;

        // Lower end: walk down from the surface VBM until the bulk, holes
        // included, outweighs the sheet.
        let mut lo = ef_flat.min(0.0);
        let mut phi_lo = phi_hi.clone();
        loop {
            let r = problem.inner(lo, &phi_lo)?;
            inner_total += r.iterations;
            let (_, _, q) = problem.charge(&r.phi, lo);
            phi_lo = r.phi;
            if q >= 0.0 {
                break;
            }
            if lo < -params.e_gap {
                return Err(Error::Bracket(format!(
                    "no neutral Fermi level above {lo} eV for acceptor density {} nm⁻²",
                    surface.acceptor_density
                )));
            }
            hi = lo;
            phi_hi = phi_lo.clone();
            lo -= 0.5;
        }

        loop {
            outer += 1;
            let mid = 0.5 * (lo + hi);
            let start = if (mid - lo).abs() < (hi - mid).abs() { &phi_lo } else { &phi_hi };
            let r = problem.inner(mid, start)?;
            inner_total += r.iterations;
            inner_ok = r.converged;
            let (_, _, q) = problem.charge(&r.phi, mid);
            best = (mid, r.phi.clone(), q, r.converged);
            if neutral_enough(q) || hi - lo < opts.tol_fermi || outer >= opts.max_outer {
                break;
            }
            if q > 0.0 {
                lo = mid;
                phi_lo = r.phi;
            } else {
                hi = mid;
                phi_hi = r.phi;
            }
        }
    }

    let (fermi_level, phi, q, _) = best;
    let (rho, sheet, _) = problem.charge(&phi, fermi_level);
    let residual = poisson_residual(&phi, &rho, grid, params.eps_r, sheet);
    let residual_norm = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let residual_ok = residual_norm <= 10.0 * opts.tol_phi / grid.step().powi(2);

    Ok(BandProfile {
        grid: grid.clone(),
        phi,
        fermi_level,
        surface_sheet_charge: sheet,
        residual_norm,
        net_charge: q,
        iterations: outer,
        inner_iterations: inner_total,
        converged: inner_ok && neutral_enough(q) && residual_ok,
    })
}

/// Depth below the surface (nm) where the shifted NV⁻/⁰ level crosses the
/// Fermi level, scanning outward from the center. `None` without a crossing.
pub fn crossover_depth(profile: &BandProfile, params: &MaterialParams) -> Result<Option<f64>> {
    if !profile.converged {
        return domain("crossover depth requires a converged profile");
    }
    Ok(level_crossing(profile, params))
}

pub(crate) fn level_crossing(profile: &BandProfile, params: &MaterialParams) -> Option<f64> {
    let offsets = profile.nv_level_offsets(params);
    let grid = &profile.grid;
    let nodes = grid.nodes();
    for i in 0..offsets.len() {
        if offsets[i] == 0.0 {
            return Some(grid.depth(i));
        }
        if i + 1 < offsets.len() && offsets[i].signum() != offsets[i + 1].signum() && offsets[i + 1] != 0.0 {
            let t = offsets[i] / (offsets[i] - offsets[i + 1]);
            let r = nodes[i] + t * (nodes[i + 1] - nodes[i]);
            return Some(grid.radius() - r);
        }
    }
    None
}
