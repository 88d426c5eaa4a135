//! Finite-volume discretization of the radial Poisson equation.
//!
//! The unknown is the rigid band-edge shift φ(r) in eV (electron energy),
//! so a positive charge density curves the bands upward toward the surface:
//!
//! ```text
//! (1/r²) d/dr (r² dφ/dr) = (e/ε₀ε_r) ρ
//! ```
//!
//! Each node owns the spherical shell between its neighboring faces. Rows
//! `0..M-1` balance the flux through the faces against the shell charge
//! (zero flux through r = 0). The surface node is the gauge, φ(R) = 0. Its
//! own balance row, which carries the sheet charge and a field-free
//! exterior, holds exactly when the particle is neutral; the
//! self-consistent solver enforces that through the Fermi level.

use std::f64::consts::PI;

use super::grid::RadialGrid;
use crate::constants::E_OVER_EPS0;
use crate::error::{domain, Error, Result};
use crate::tridiag;

/// Band curvature per unit charge density, eV·nm.
pub fn coupling(eps_r: f64) -> f64 {
    E_OVER_EPS0 / eps_r
}

/// Tridiagonal coefficients of the flux operator on rows `0..M-1`, with the
/// Dirichlet surface node folded out. Returned as (lower, diag, upper).
pub(crate) fn flux_operator(grid: &RadialGrid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = grid.len() - 1;
    let h = grid.step();
    let mut lower = vec![0.0; m.saturating_sub(1)];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m.saturating_sub(1)];
    for i in 0..m {
        let a_out = grid.face(i).powi(2) / h;
        let a_in = if i == 0 { 0.0 } else { grid.face(i - 1).powi(2) / h };
        diag[i] = -(a_out + a_in);
        if i + 1 < m {
            upper[i] = a_out;
        }
        if i > 0 {
            lower[i - 1] = a_in;
        }
    }
    (lower, diag, upper)
}

/// Net flux out of each node's shell, divided by 4π.
fn outward_flux(phi: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let m = grid.len() - 1;
    let h = grid.step();
    (0..=m)
        .map(|i| {
            let out = if i == m {
                0.0
            } else {
                grid.face(i).powi(2) * (phi[i + 1] - phi[i]) / h
            };
            let inn = if i == 0 {
                0.0
            } else {
                grid.face(i - 1).powi(2) * (phi[i] - phi[i - 1]) / h
            };
            out - inn
        })
        .collect()
}

/// Solves for the band shift produced by the charge density `rho`
/// (e·nm⁻³ per node) and a surface sheet `sheet_charge` (e·nm⁻²), with
/// zero slope at the center and φ(R) = 0.
///
/// The sheet only enters the outer balance row; see [`net_charge`] for the
/// neutrality condition under which that row is satisfied as well.
pub fn solve_poisson_radial(
    rho: &[f64],
    grid: &RadialGrid,
    eps_r: f64,
    sheet_charge: f64,
) -> Result<Vec<f64>> {
    if grid.len() < 3 {
        return domain("grid needs at least 3 nodes");
    }
    if rho.len() != grid.len() {
        return domain(format!(
            "charge density has {} entries for {} nodes",
            rho.len(),
            grid.len()
        ));
    }
    if rho.iter().any(|v| !v.is_finite()) || !sheet_charge.is_finite() {
        return Err(Error::Numeric("non-finite charge density".into()));
    }
    if !(eps_r > 0.0) {
        return domain("eps_r must be positive");
    }
    let k = coupling(eps_r);
    let volumes = grid.cell_volumes();
    let m = grid.len() - 1;
    let (lower, diag, upper) = flux_operator(grid);
    let rhs: Vec<f64> = (0..m).map(|i| k * rho[i] * volumes[i]).collect();
    let mut phi = tridiag::solve(&lower, &diag, &upper, &rhs)?;
    phi.push(0.0);
    Ok(phi)
}

/// Total charge of the particle in units of e: bulk shells plus the sheet.
pub fn net_charge(rho: &[f64], grid: &RadialGrid, sheet_charge: f64) -> f64 {
    let bulk: f64 = rho
        .iter()
        .zip(grid.cell_volumes())
        .map(|(r, v)| r * v)
        .sum();
    4.0 * PI * (bulk + sheet_charge * grid.radius().powi(2))
}

/// Pointwise residual of the discrete Poisson equation, eV/nm²: the flux
/// divergence per shell volume minus the coupling times the charge
/// density. The last entry includes the sheet charge.
pub fn poisson_residual(
    phi: &[f64],
    rho: &[f64],
    grid: &RadialGrid,
    eps_r: f64,
    sheet_charge: f64,
) -> Vec<f64> {
    let k = coupling(eps_r);
    let volumes = grid.cell_volumes();
    let m = grid.len() - 1;
    let r2 = grid.radius().powi(2);
    outward_flux(phi, grid)
        .into_iter()
        .enumerate()
        .map(|(i, flux)| {
            let mut q = rho[i] * volumes[i];
            if i == m {
                q += sheet_charge * r2;
            }
            (flux - k * q) / volumes[i]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_problem_is_flat() {
        let g = RadialGrid::standard();
        let phi = solve_poisson_radial(&vec![0.0; g.len()], &g, 5.7, 0.0).unwrap();
        assert!(phi.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn too_few_nodes() {
        let g = RadialGrid::new(1.0, 0.5).unwrap();
        assert_eq!(g.len(), 3);
        assert!(solve_poisson_radial(&[0.0; 2], &g, 5.7, 0.0).is_err());
    }

    #[test]
    fn non_finite_density_rejected() {
        let g = RadialGrid::new(2.0, 0.5).unwrap();
        let rho = [0.0, f64::NAN, 0.0, 0.0, 0.0];
        assert!(matches!(
            solve_poisson_radial(&rho, &g, 5.7, 0.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn neutral_input_satisfies_every_row() {
        let g = RadialGrid::new(10.0, 0.5).unwrap();
        let rho: Vec<f64> = g.nodes().iter().map(|r| 0.01 * (1.0 + (r / 3.0).sin())).collect();
        let bulk: f64 = rho.iter().zip(g.cell_volumes()).map(|(r, v)| r * v).sum();
        let sheet = -bulk / 100.0;
        assert!(net_charge(&rho, &g, sheet).abs() < 1e-12);
        let phi = solve_poisson_radial(&rho, &g, 5.7, sheet).unwrap();
        let res = poisson_residual(&phi, &rho, &g, 5.7, sheet);
        let worst = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        assert!(worst < 1e-12, "{worst}");
    }
}
