//! The four subcommands. Each reads a validated [`RunConfig`], writes its
//! table or report and says whether the numerics converged.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use nvcharge::bandsolver::{crossover_depth, solve_selfconsistent, BandProfile, MaterialParams};
use nvcharge::kinetics::{fit_power_curve, load_power_curve, FitOptions, KineticFit};
use nvcharge::occupation::{average_occupancy, occupancy_profile, sweep_surface_density, FractionCurve};
use nvcharge::spectra::{fit_fraction, load_spectrum, FitResult, ReferenceSet, Spectrum};

use crate::config::RunConfig;
use crate::exit::Status;

/// Where results go and how chatty to be.
#[derive(Debug, Clone, Default)]
pub struct Output {
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Output {
    /// The primary table or report: the `--out` file, or stdout.
    fn primary(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    /// Writes a JSON report to `--out` (if set) and echoes it to stdout
    /// unless `--quiet` already routed it to a file.
    fn report<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = format!("{}\n", serde_json::to_string_pretty(value)?);
        if let Some(p) = &self.out {
            std::fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?;
            if self.quiet {
                return Ok(());
            }
        }
        io::stdout().write_all(text.as_bytes())?;
        Ok(())
    }

    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

pub const BAND_HEADER: &str = "depth_nm,phi_ev,ec_ev,ev_ev,e_nv_ev,fermi_ev,occupancy";
pub const SWEEP_HEADER: &str = "density_nm2,nv_minus_fraction,converged";

/// Shortest round-trip decimal form, switching to exponent notation for
/// very small or very large magnitudes so tables stay readable.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BandSummary {
    pub fermi_level_ev: f64,
    pub crossover_depth_nm: Option<f64>,
    pub nv_minus_fraction: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn write_band_table<W: Write>(mut w: W, profile: &BandProfile, params: &MaterialParams, occ: &[f64]) -> io::Result<()> {
    writeln!(w, "{BAND_HEADER}")?;
    for i in (0..profile.phi.len()).rev() {
        let phi = profile.phi[i];
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt_num(profile.grid.depth(i)),
            fmt_num(phi),
            fmt_num(params.e_gap + phi),
            fmt_num(phi),
            fmt_num(params.e_nv_transition + phi),
            fmt_num(profile.fermi_level),
            fmt_num(occ[i])
        )?;
    }
    w.flush()
}

pub fn simulate_band(cfg: &RunConfig, summary_path: Option<&Path>, output: &Output) -> Result<Status> {
    let grid = cfg.radial_grid()?;
    let profile = solve_selfconsistent(&cfg.material, &grid, &cfg.surface, &cfg.solver)?;
    let occ = occupancy_profile(&profile, &cfg.material);
    let fraction = average_occupancy(&grid, &occ, &cfg.profile)?;
    let crossover = if profile.converged {
        crossover_depth(&profile, &cfg.material)?
    } else {
        None
    };
    write_band_table(output.primary()?, &profile, &cfg.material, &occ)?;

    let summary = BandSummary {
        fermi_level_ev: profile.fermi_level,
        crossover_depth_nm: crossover,
        nv_minus_fraction: fraction,
        converged: profile.converged,
        iterations: profile.iterations,
    };
    let text = format!("{}\n", serde_json::to_string_pretty(&summary)?);
    if let Some(p) = summary_path {
        std::fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    if output.out.is_some() {
        if !output.quiet {
            io::stdout().write_all(text.as_bytes())?;
        }
    } else if summary_path.is_none() && !output.quiet {
        // The table owns stdout; keep the summary visible on stderr.
        eprint!("{text}");
    }
    if profile.converged {
        Ok(Status::Success)
    } else {
        output.note(&format!(
            "band solver did not converge (neutrality error {:.3e}, residual {:.3e})",
            profile.neutrality_error(),
            profile.residual_norm
        ));
        Ok(Status::NotConverged)
    }
}

fn write_sweep_table<W: Write>(mut w: W, curve: &FractionCurve) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for i in 0..curve.len() {
        writeln!(
            w,
            "{},{},{}",
            fmt_num(curve.densities[i]),
            fmt_num(curve.fractions[i]),
            curve.converged[i]
        )?;
    }
    w.flush()
}

pub fn sweep(cfg: &RunConfig, output: &Output) -> Result<Status> {
    if cfg.sweep_densities.is_empty() {
        bail!("the density list is empty");
    }
    let grid = cfg.radial_grid()?;
    let curve = sweep_surface_density(
        &cfg.sweep_densities,
        &cfg.material,
        &grid,
        cfg.surface.mode,
        &cfg.profile,
        &cfg.solver,
        false,
    )?;
    write_sweep_table(output.primary()?, &curve)?;
    let failed = curve.converged.iter().filter(|c| !**c).count();
    if failed > 0 {
        output.note(&format!("{failed} of {} points did not converge", curve.len()));
    }
    Ok(Status::Success)
}

fn read_spectrum(path: &Path, label: &str) -> Result<Spectrum> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_spectrum(BufReader::new(f), label).with_context(|| format!("reading {}", path.display()))
}

pub fn fit_spectrum(cfg: &RunConfig, output: &Output) -> Result<Status> {
    let Some(measured_path) = &cfg.io.measured else {
        bail!("no measured spectrum given (argument or io.measured)");
    };
    let measured = read_spectrum(measured_path, "measured")?;
    let refs = match (&cfg.io.ref_nv_minus, &cfg.io.ref_nv_zero) {
        (Some(m), Some(z)) => ReferenceSet::new(
            read_spectrum(m, "NV-")?,
            read_spectrum(z, "NV0")?,
            cfg.spectra.normalize_references,
        )?,
        (None, None) => {
            output.note("no reference spectra given; using the built-in synthetic basis");
            ReferenceSet::synthetic()
        }
        _ => bail!("both io.ref_nv_minus and io.ref_nv_zero are needed"),
    };
    let (window, exclusions) = cfg.spectra.effective();
    let result: FitResult = fit_fraction(&measured, &refs, window, &exclusions)?;
    output.report(&result)?;
    Ok(Status::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct KineticsReport {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub trap_capacity: f64,
    pub residual_rms: f64,
    pub hysteresis_area: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub covariance: Option<[[f64; 5]; 5]>,
}

impl From<&KineticFit> for KineticsReport {
    fn from(f: &KineticFit) -> Self {
        Self {
            alpha: f.params.alpha,
            beta: f.params.beta,
            gamma: f.params.gamma,
            delta: f.params.delta,
            trap_capacity: f.params.trap_capacity,
            residual_rms: f.residual_rms,
            hysteresis_area: f.hysteresis_area,
            converged: f.converged,
            iterations: f.iterations,
            covariance: f.covariance,
        }
    }
}

/// Smallest curve the fit accepts.
pub const MIN_CURVE_ROWS: usize = 5;

pub fn fit_kinetics(cfg: &RunConfig, output: &Output) -> Result<Status> {
    let Some(path) = &cfg.io.curve else {
        bail!("no power curve given (argument or io.curve)");
    };
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let curve = load_power_curve(BufReader::new(f), cfg.kinetics.dwell_s)
        .with_context(|| format!("reading {}", path.display()))?;
    if curve.len() < MIN_CURVE_ROWS {
        bail!("{} has {} rows; at least {MIN_CURVE_ROWS} are needed", path.display(), curve.len());
    }
    let opts = FitOptions {
        max_iterations: cfg.kinetics.max_iterations,
        initial: cfg.kinetics.initial,
        ..FitOptions::default()
    };
    let fit = fit_power_curve(&curve, &cfg.kinetics.init, &cfg.kinetics.bounds, &opts)?;
    if fit.ill_conditioned {
        output.note("warning: the fit Jacobian is rank deficient; no covariance reported");
    }
    output.report(&KineticsReport::from(&fit))?;
    if fit.converged {
        Ok(Status::Success)
    } else {
        output.note(&format!("fit stopped after {} iterations without converging", fit.iterations));
        Ok(Status::NotConverged)
    }
}
