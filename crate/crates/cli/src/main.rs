use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use nvcharge_cli::commands::{self, Output};
use nvcharge_cli::config::{self, RunConfig};
use nvcharge_cli::exit::{self, Status};

/// Band bending, NV charge-state statistics, spectral unmixing and
/// charge kinetics for surface-functionalized nanodiamonds.
#[derive(Parser, Debug)]
#[command(name = "nvcharge", version)]
struct Cli {
    /// Parameter file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Write the primary table or report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Suppress notes on stderr, and the stdout echo when --out is set.
    #[arg(long, global = true)]
    quiet: bool,

    /// Override a config key, e.g. `--set material.eps_r=5.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the band profile for one surface acceptor density.
    SimulateBand(SimulateBand),
    /// NV⁻ fraction over a list of surface acceptor densities.
    Sweep(Sweep),
    /// Two-component unmixing of a photoluminescence spectrum.
    FitSpectrum(FitSpectrum),
    /// Fit rate coefficients to an NV⁻ fraction versus power curve.
    FitKinetics(FitKinetics),
}

#[derive(Args, Debug)]
struct SimulateBand {
    /// Surface acceptor density, nm⁻².
    #[arg(long, value_name = "NM2")]
    acceptor_density: Option<f64>,
    /// Also write the summary JSON to this file.
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Sweep {
    /// Comma-separated, strictly increasing densities in nm⁻².
    #[arg(long, value_name = "LIST", allow_hyphen_values = true)]
    densities: Option<String>,
}

#[derive(Args, Debug)]
struct FitSpectrum {
    /// Measured spectrum CSV (`wavelength_nm,intensity`).
    measured: Option<PathBuf>,
    /// NV⁻ reference spectrum CSV.
    #[arg(long, value_name = "PATH")]
    ref_minus: Option<PathBuf>,
    /// NV⁰ reference spectrum CSV.
    #[arg(long, value_name = "PATH")]
    ref_zero: Option<PathBuf>,
    /// Fit window `LO,HI` in nm.
    #[arg(long, value_name = "LO,HI")]
    window: Option<String>,
    /// Exclude `LO:HI` nm from the fit. Repeatable.
    #[arg(long, value_name = "LO:HI")]
    exclude: Vec<String>,
    /// Exclude the diamond Raman line.
    #[arg(long)]
    exclude_raman: bool,
    /// Stop the window at 700 nm, where CCD etaloning sets in.
    #[arg(long)]
    cap_etalon: bool,
}

#[derive(Args, Debug)]
struct FitKinetics {
    /// Power curve CSV (`power_mw,nv_minus_fraction`) in acquisition order.
    curve: Option<PathBuf>,
    /// Seconds spent at each power.
    #[arg(long, value_name = "SECONDS")]
    dwell: Option<f64>,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let here = Path::new("");
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim(), here).with_context(|| format!("--set {kv}"))?;
    }
    match &cli.command {
        Command::SimulateBand(a) => {
            if let Some(d) = a.acceptor_density {
                cfg.surface.acceptor_density = d;
            }
        }
        Command::Sweep(a) => {
            if let Some(list) = &a.densities {
                cfg.sweep_densities = config::number_list("--densities", list)?;
            }
        }
        Command::FitSpectrum(a) => {
            if let Some(p) = &a.measured {
                cfg.io.measured = Some(p.clone());
            }
            if let Some(p) = &a.ref_minus {
                cfg.io.ref_nv_minus = Some(p.clone());
            }
            if let Some(p) = &a.ref_zero {
                cfg.io.ref_nv_zero = Some(p.clone());
            }
            if let Some(w) = &a.window {
                cfg.spectra.window_nm = config::pair("--window", w)?;
            }
            if !a.exclude.is_empty() {
                cfg.spectra.exclude_nm = a
                    .exclude
                    .iter()
                    .map(|e| config::interval("--exclude", e))
                    .collect::<Result<_>>()?;
            }
            cfg.spectra.exclude_raman |= a.exclude_raman;
            cfg.spectra.cap_etalon |= a.cap_etalon;
        }
        Command::FitKinetics(a) => {
            if let Some(p) = &a.curve {
                cfg.io.curve = Some(p.clone());
            }
            if let Some(d) = a.dwell {
                cfg.kinetics.dwell_s = d;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Status> {
    let cfg = build_config(cli)?;
    let output = Output { out: cli.out.clone(), quiet: cli.quiet };
    match &cli.command {
        Command::SimulateBand(a) => commands::simulate_band(&cfg, a.summary.as_deref(), &output),
        Command::Sweep(_) => commands::sweep(&cfg, &output),
        Command::FitSpectrum(_) => commands::fit_spectrum(&cfg, &output),
        Command::FitKinetics(_) => commands::fit_kinetics(&cfg, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_for(&e))
        }
    }
}
