//! Run configuration: built-in defaults, overridden by a flat
//! `section.key=value` file, overridden in turn by command-line settings.
//!
//! ```text
//! # comment
//! material.eps_r = 5.7
//! grid.diameter_nm = 40
//! surface.acceptor_density = 1.0
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nvcharge::bandsolver::{MaterialParams, RadialGrid, SolverOptions, SurfaceMode, SurfaceModel};
use nvcharge::kinetics::{ChargeState, InitialCondition, KineticParams, ParamBounds};
use nvcharge::occupation::DensityProfile;
use nvcharge::spectra::{DEFAULT_WINDOW_NM, ETALON_CUTOFF_NM, RAMAN_EXCLUSION_NM};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub radius_nm: f64,
    pub step_nm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectraConfig {
    pub window_nm: (f64, f64),
    pub exclude_nm: Vec<(f64, f64)>,
    pub exclude_raman: bool,
    pub cap_etalon: bool,
    pub normalize_references: bool,
}

impl SpectraConfig {
    /// Fit window and exclusion list after applying the convenience flags.
    pub fn effective(&self) -> ((f64, f64), Vec<(f64, f64)>) {
        let mut window = self.window_nm;
        if self.cap_etalon {
            window.1 = window.1.min(ETALON_CUTOFF_NM);
        }
        let mut exclude = self.exclude_nm.clone();
        if self.exclude_raman && !exclude.contains(&RAMAN_EXCLUSION_NM) {
            exclude.push(RAMAN_EXCLUSION_NM);
        }
        (window, exclude)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticsConfig {
    pub init: KineticParams,
    pub bounds: ParamBounds,
    pub dwell_s: f64,
    pub max_iterations: usize,
    pub initial: InitialCondition,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IoConfig {
    pub measured: Option<PathBuf>,
    pub ref_nv_minus: Option<PathBuf>,
    pub ref_nv_zero: Option<PathBuf>,
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub grid: GridConfig,
    pub surface: SurfaceModel,
    pub solver: SolverOptions,
    pub profile: DensityProfile,
    pub sweep_densities: Vec<f64>,
    pub spectra: SpectraConfig,
    pub kinetics: KineticsConfig,
    pub io: IoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let grid = RadialGrid::standard();
        Self {
            material: MaterialParams::default(),
            grid: GridConfig { radius_nm: grid.radius(), step_nm: grid.step() },
            surface: SurfaceModel::fully_ionized(0.0),
            solver: SolverOptions::default(),
            profile: DensityProfile::UniformVolume,
            sweep_densities: (0..20).map(|i| 2.0 * i as f64 / 19.0).collect(),
            spectra: SpectraConfig {
                window_nm: DEFAULT_WINDOW_NM,
                exclude_nm: Vec::new(),
                exclude_raman: false,
                cap_etalon: false,
                normalize_references: true,
            },
            kinetics: KineticsConfig {
                init: KineticParams::default(),
                bounds: ParamBounds::default(),
                dwell_s: 60.0,
                max_iterations: 200,
                initial: InitialCondition::SteadyState,
            },
            io: IoConfig::default(),
        }
    }
}

const KINETIC_NAMES: [&str; 5] = ["alpha", "beta", "gamma", "delta", "trap_capacity"];

fn number(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| anyhow!("`{key}` expects a number, got `{value}`"))?;
    if !v.is_finite() {
        bail!("`{key}` must be finite");
    }
    Ok(v)
}

fn count(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| anyhow!("`{key}` expects a non-negative integer, got `{value}`"))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("`{key}` expects true or false, got `{value}`"),
    }
}

/// Comma-separated list of numbers.
pub fn number_list(key: &str, value: &str) -> Result<Vec<f64>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| number(key, s.trim())).collect()
}

/// `lo,hi` pair.
pub fn pair(key: &str, value: &str) -> Result<(f64, f64)> {
    match number_list(key, value)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => bail!("`{key}` expects two comma-separated numbers, got `{value}`"),
    }
}

/// `lo:hi` interval.
pub fn interval(key: &str, value: &str) -> Result<(f64, f64)> {
    let (a, b) = value
        .split_once(':')
        .ok_or_else(|| anyhow!("`{key}` expects intervals written lo:hi, got `{value}`"))?;
    let (a, b) = (number(key, a.trim())?, number(key, b.trim())?);
    if a > b {
        bail!("`{key}` interval {a}:{b} is reversed");
    }
    Ok((a, b))
}

impl RunConfig {
    /// Defaults overridden by the file at `path`. Relative paths in the
    /// file are taken relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::default();
        cfg.apply_text(&text, &base)
            .with_context(|| format!("in config file {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `section.key = value`", idx + 1))?;
            self.set(key.trim(), value.trim(), base)
                .with_context(|| format!("line {}", idx + 1))?;
        }
        Ok(())
    }

    /// Applies one `section.key = value` setting.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_relative() {
                base.join(p)
            } else {
                p
            }
        };
        let m = &mut self.material;
        match key {
            "material.eps_r" => m.eps_r = number(key, value)?,
            "material.e_gap" => m.e_gap = number(key, value)?,
            "material.e_nv_transition" => m.e_nv_transition = number(key, value)?,
            "material.e_donor_ionization" => m.e_donor_ionization = number(key, value)?,
            "material.n_donor_ppm" => m.n_donor_ppm = number(key, value)?,
            "material.n_nv_ppm" => m.n_nv_ppm = number(key, value)?,
            "material.atomic_density" => m.atomic_density = number(key, value)?,
            "material.n_c" => m.n_c = number(key, value)?,
            "material.n_v" => m.n_v = number(key, value)?,
            "material.temperature" => m.temperature = number(key, value)?,

            "grid.radius_nm" => self.grid.radius_nm = number(key, value)?,
            "grid.diameter_nm" => self.grid.radius_nm = 0.5 * number(key, value)?,
            "grid.step_nm" => self.grid.step_nm = number(key, value)?,

            "surface.acceptor_density" => self.surface.acceptor_density = number(key, value)?,
            "surface.mode" => {
                self.surface.mode = match value {
                    "fully_ionized" => SurfaceMode::FullyIonized,
                    "level_pinned" => {
                        let e_acceptor = match self.surface.mode {
                            SurfaceMode::LevelPinned { e_acceptor } => e_acceptor,
                            SurfaceMode::FullyIonized => 0.0,
                        };
                        SurfaceMode::LevelPinned { e_acceptor }
                    }
                    _ => bail!("`{key}` must be fully_ionized or level_pinned, got `{value}`"),
                }
            }
            "surface.e_acceptor" => {
                let e = number(key, value)?;
                match &mut self.surface.mode {
                    SurfaceMode::LevelPinned { e_acceptor } => *e_acceptor = e,
                    SurfaceMode::FullyIonized => {
                        self.surface.mode = SurfaceMode::LevelPinned { e_acceptor: e }
                    }
                }
            }

            "solver.tol_phi" => self.solver.tol_phi = number(key, value)?,
            "solver.mixing" => self.solver.mixing = number(key, value)?,
            "solver.max_inner" => self.solver.max_inner = count(key, value)?,
            "solver.max_outer" => self.solver.max_outer = count(key, value)?,
            "solver.tol_fermi" => self.solver.tol_fermi = number(key, value)?,
            "solver.tol_neutrality" => self.solver.tol_neutrality = number(key, value)?,
            "solver.max_step" => self.solver.max_step = number(key, value)?,

            "occupation.profile" => {
                self.profile = match value {
                    "uniform_volume" => DensityProfile::UniformVolume,
                    "uniform_depth" => DensityProfile::UniformDepth,
                    _ => bail!("`{key}` must be uniform_volume or uniform_depth, got `{value}`"),
                }
            }

            "sweep.densities" => self.sweep_densities = number_list(key, value)?,

            "spectra.window_nm" => self.spectra.window_nm = pair(key, value)?,
            "spectra.exclude_nm" => {
                self.spectra.exclude_nm = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| interval(key, s))
                    .collect::<Result<_>>()?
            }
            "spectra.exclude_raman" => self.spectra.exclude_raman = flag(key, value)?,
            "spectra.cap_etalon" => self.spectra.cap_etalon = flag(key, value)?,
            "spectra.normalize_references" => self.spectra.normalize_references = flag(key, value)?,

            "kinetics.dwell_s" => self.kinetics.dwell_s = number(key, value)?,
            "kinetics.max_iterations" => self.kinetics.max_iterations = count(key, value)?,
            "kinetics.exponent_ionization" => self.kinetics.init.exponents.ionization = number(key, value)?,
            "kinetics.exponent_recombination" => {
                self.kinetics.init.exponents.recombination = number(key, value)?
            }
            "kinetics.exponent_transfer" => self.kinetics.init.exponents.transfer = number(key, value)?,
            "kinetics.initial" => {
                self.kinetics.initial = if value == "steady_state" {
                    InitialCondition::SteadyState
                } else {
                    let (m, t) = pair(key, value)?;
                    InitialCondition::Fixed(ChargeState::new(m, t))
                }
            }

            "io.measured" => self.io.measured = Some(path(value)),
            "io.ref_nv_minus" => self.io.ref_nv_minus = Some(path(value)),
            "io.ref_nv_zero" => self.io.ref_nv_zero = Some(path(value)),
            "io.curve" => self.io.curve = Some(path(value)),

            _ => return self.set_kinetic(key, value),
        }
        Ok(())
    }

    /// `kinetics.<name>`, `kinetics.<name>_min` and `kinetics.<name>_max`.
    fn set_kinetic(&mut self, key: &str, value: &str) -> Result<()> {
        let unknown = || anyhow!("unknown config key `{key}`");
        let rest = key.strip_prefix("kinetics.").ok_or_else(unknown)?;
        let (name, slot) = if let Some(n) = rest.strip_suffix("_min") {
            (n, 1)
        } else if let Some(n) = rest.strip_suffix("_max") {
            (n, 2)
        } else {
            (rest, 0)
        };
        let i = KINETIC_NAMES.iter().position(|n| *n == name).ok_or_else(unknown)?;
        let v = number(key, value)?;
        match slot {
            0 => {
                let p = &mut self.kinetics.init;
                *[&mut p.alpha, &mut p.beta, &mut p.gamma, &mut p.delta, &mut p.trap_capacity][i] = v;
            }
            1 => self.kinetics.bounds.lower[i] = v,
            _ => self.kinetics.bounds.upper[i] = v,
        }
        Ok(())
    }

    pub fn radial_grid(&self) -> Result<RadialGrid> {
        Ok(RadialGrid::new(self.grid.radius_nm, self.grid.step_nm)?)
    }

    /// Checks parameter invariants and that every referenced input exists.
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.radial_grid()?;
        self.surface.validate(self.material.e_gap)?;
        self.solver.validate()?;
        self.kinetics.init.validate()?;
        self.kinetics.bounds.validate()?;
        if !(self.kinetics.dwell_s.is_finite() && self.kinetics.dwell_s > 0.0) {
            bail!("kinetics.dwell_s must be positive");
        }
        let io = &self.io;
        for (name, p) in [
            ("io.measured", &io.measured),
            ("io.ref_nv_minus", &io.ref_nv_minus),
            ("io.ref_nv_zero", &io.ref_nv_zero),
            ("io.curve", &io.curve),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    bail!("{name}: {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }
}
