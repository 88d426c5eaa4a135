use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniform radial grid from the particle center (r = 0) to its surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    radius_nm: f64,
    step_nm: f64,
    nodes: Vec<f64>,
}

impl RadialGrid {
    /// Builds the grid; `radius_nm / step_nm` must be an integer ≥ 2 to
    /// within 1e-9 relative.
    pub fn new(radius_nm: f64, step_nm: f64) -> Result<Self> {
        if !(radius_nm.is_finite() && step_nm.is_finite()) || radius_nm <= 0.0 || step_nm <= 0.0 {
            return domain(format!(
                "radius ({radius_nm}) and step ({step_nm}) must be positive"
            ));
        }
        let ratio = radius_nm / step_nm;
        let intervals = ratio.round();
        if (ratio - intervals).abs() > 1e-9 * ratio.max(1.0) {
            return domain(format!(
                "radius {radius_nm} nm is not an integer multiple of step {step_nm} nm"
            ));
        }
        if intervals < 2.0 {
            return domain("grid needs at least 3 nodes");
        }
        let m = intervals as usize;
        let nodes = (0..=m)
            .map(|i| if i == m { radius_nm } else { radius_nm * i as f64 / m as f64 })
            .collect();
        Ok(Self {
            radius_nm,
            step_nm: radius_nm / m as f64,
            nodes,
        })
    }

    /// 40 nm diameter particle at 0.5 nm resolution.
    pub fn standard() -> Self {
        Self::new(20.0, 0.5).expect("valid default grid")
    }

    pub fn radius(&self) -> f64 {
        self.radius_nm
    }

    pub fn step(&self) -> f64 {
        self.step_nm
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Depth below the surface of node `i`.
    pub fn depth(&self, i: usize) -> f64 {
        self.radius_nm - self.nodes[i]
    }

    /// Face radius between node `i` and `i + 1`.
    pub(crate) fn face(&self, i: usize) -> f64 {
        0.5 * (self.nodes[i] + self.nodes[i + 1])
    }

    /// Control-volume of each node divided by 4π: the exact shell volume
    /// between neighboring faces (half shells at both ends).
    pub fn cell_volumes(&self) -> Vec<f64> {
        let m = self.nodes.len() - 1;
        (0..=m)
            .map(|i| {
                let inner = if i == 0 { 0.0 } else { self.face(i - 1) };
                let outer = if i == m { self.radius_nm } else { self.face(i) };
                (outer.powi(3) - inner.powi(3)) / 3.0
            })
            .collect()
    }
}
