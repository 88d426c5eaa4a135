use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::occupation::fermi_dirac;

/// How the surface acceptor sheet takes up electrons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SurfaceMode {
    /// Every acceptor holds one electron.
    FullyIonized,
    /// Acceptor occupancy follows Fermi-Dirac statistics at a level
    /// `e_acceptor` eV above the surface VBM.
    LevelPinned { e_acceptor: f64 },
}

/// Layer of electron-accepting cation/crown-ether complexes on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceModel {
    /// Acceptor areal density, nm⁻².
    pub acceptor_density: f64,
    pub mode: SurfaceMode,
}

impl SurfaceModel {
    pub fn fully_ionized(acceptor_density: f64) -> Self {
        Self {
            acceptor_density,
            mode: SurfaceMode::FullyIonized,
        }
    }

    pub fn validate(&self, e_gap: f64) -> Result<()> {
        if !self.acceptor_density.is_finite() || self.acceptor_density < 0.0 {
            return domain(format!(
                "acceptor density must be non-negative, got {}",
                self.acceptor_density
            ));
        }
        if let SurfaceMode::LevelPinned { e_acceptor } = self.mode {
            if !(0.0..=e_gap).contains(&e_acceptor) {
                return domain(format!(
                    "acceptor level {e_acceptor} eV must lie within [0, {e_gap}]"
                ));
            }
        }
        Ok(())
    }

    /// Signed sheet charge (units of e per nm²) for a surface band shift
    /// `phi_surface` and Fermi level `fermi_level`.
    pub fn sheet_charge(&self, phi_surface: f64, fermi_level: f64, kt: f64) -> f64 {
        match self.mode {
            SurfaceMode::FullyIonized => -self.acceptor_density,
            SurfaceMode::LevelPinned { e_acceptor } => {
                -self.acceptor_density * fermi_dirac(e_acceptor + phi_surface - fermi_level, kt)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_sheet_is_half_filled_at_level() {
        let s = SurfaceModel {
            acceptor_density: 0.4,
            mode: SurfaceMode::LevelPinned { e_acceptor: 1.0 },
        };
        assert!((s.sheet_charge(0.0, 1.0, 0.025) + 0.2).abs() < 1e-15);
        assert!(s.sheet_charge(0.0, 2.0, 0.025) < -0.399);
    }

    #[test]
    fn validation() {
        assert!(SurfaceModel::fully_ionized(-0.1).validate(5.47).is_err());
        let s = SurfaceModel {
            acceptor_density: 1.0,
            mode: SurfaceMode::LevelPinned { e_acceptor: 6.0 },
        };
        assert!(s.validate(5.47).is_err());
        assert!(SurfaceModel::fully_ionized(0.0).validate(5.47).is_ok());
    }
}
