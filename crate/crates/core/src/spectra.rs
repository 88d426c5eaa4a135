//! Photoluminescence spectra and two-component NV⁻/NV⁰ unmixing.
//!
//! A measured spectrum is modeled as `I(λ) = c₁ I₋(λ) + c₂ I₀(λ)` with
//! non-negative coefficients; the NV⁻ fraction is `c₁ / (c₁ + c₂)` and the
//! overall amplitude `c₁ + c₂`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// CSV header of spectrum files.
pub const SPECTRUM_HEADER: &str = "wavelength_nm,intensity";

/// Default fit window, nm.
pub const DEFAULT_WINDOW_NM: (f64, f64) = (560.0, 750.0);

/// First-order diamond Raman line under 532 nm excitation, nm.
pub const RAMAN_EXCLUSION_NM: (f64, f64) = (572.0, 574.0);

/// Upper window bound that avoids CCD etaloning, nm.
pub const ETALON_CUTOFF_NM: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    wavelengths: Vec<f64>,
    intensities: Vec<f64>,
    pub label: String,
}

impl Spectrum {
    pub fn new(wavelengths: Vec<f64>, intensities: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if wavelengths.len() != intensities.len() {
            return domain(format!(
                "{} wavelengths but {} intensities",
                wavelengths.len(),
                intensities.len()
            ));
        }
        if wavelengths.len() < 2 {
            return domain("a spectrum needs at least two points");
        }
        if wavelengths.iter().chain(&intensities).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("spectrum contains non-finite values".into()));
        }
        if wavelengths.windows(2).any(|w| w[1] <= w[0]) {
            return domain("wavelengths must be strictly increasing");
        }
        Ok(Self {
            wavelengths,
            intensities,
            label: label.into(),
        })
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.wavelengths[0], *self.wavelengths.last().unwrap())
    }

    /// Same wavelengths, intensities multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            wavelengths: self.wavelengths.clone(),
            intensities: self.intensities.iter().map(|v| v * factor).collect(),
            label: self.label.clone(),
        }
    }
}

/// Parses a two-column `wavelength_nm,intensity` table. The header line is
/// optional; rows may come in any order.
pub fn load_spectrum<R: BufRead>(reader: R, label: &str) -> Result<Spectrum> {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 columns, found {}", fields.len()),
            });
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(w), Ok(i)) if w.is_finite() && i.is_finite() => rows.push((line_no, w, i)),
            (Ok(_), Ok(_)) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "non-finite value".into(),
                })
            }
            _ if rows.is_empty() && fields[0] == "wavelength_nm" && fields[1] == "intensity" => {}
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("cannot parse `{trimmed}` as two numbers"),
                })
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    if let Some(w) = rows.windows(2).find(|w| w[0].1 == w[1].1) {
        return Err(Error::Parse {
            line: w[1].0,
            message: format!("duplicate wavelength {} nm (first seen on line {})", w[1].1, w[0].0),
        });
    }
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: rows[0].0,
            message: "a spectrum needs at least two rows".into(),
        });
    }
    let (wavelengths, intensities) = rows.into_iter().map(|(_, w, i)| (w, i)).unzip();
    Spectrum::new(wavelengths, intensities, label)
}

pub fn write_spectrum<W: Write>(mut out: W, spectrum: &Spectrum) -> std::io::Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    for (w, i) in spectrum.wavelengths.iter().zip(&spectrum.intensities) {
        writeln!(out, "{w},{i}")?;
    }
    Ok(())
}

/// Linear interpolation of `s` onto `grid`. Exact at the source nodes;
/// no extrapolation.
pub fn resample(s: &Spectrum, grid: &[f64]) -> Result<Spectrum> {
    let (lo, hi) = s.span();
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        if !(x >= lo && x <= hi) {
            return domain(format!("{x} nm lies outside the spectrum span [{lo}, {hi}]"));
        }
        let v = match s.wavelengths.binary_search_by(|w| w.total_cmp(&x)) {
            Ok(i) => s.intensities[i],
            Err(i) => {
                let (x0, x1) = (s.wavelengths[i - 1], s.wavelengths[i]);
                let (y0, y1) = (s.intensities[i - 1], s.intensities[i]);
                let t = (x - x0) / (x1 - x0);
                y0 + t * (y1 - y0)
            }
        };
        out.push(v);
    }
    Spectrum::new(grid.to_vec(), out, s.label.clone())
}

/// Divides by the maximum intensity inside `window` (whole spectrum when
/// `None`).
pub fn peak_normalize(s: &Spectrum, window: Option<(f64, f64)>) -> Result<Spectrum> {
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let peak = s
        .wavelengths
        .iter()
        .zip(&s.intensities)
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(_, i)| *i)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return domain(format!("cannot peak-normalize: maximum intensity is {peak}"));
    }
    Ok(Spectrum {
        wavelengths: s.wavelengths.clone(),
        intensities: s.intensities.iter().map(|v| v / peak).collect(),
        label: s.label.clone(),
    })
}

/// NV⁻ and NV⁰ basis spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub ref_minus: Spectrum,
    pub ref_zero: Spectrum,
    pub normalized: bool,
}

impl ReferenceSet {
    /// Peak-normalizes both references when `normalize` is set.
    pub fn new(ref_minus: Spectrum, ref_zero: Spectrum, normalize: bool) -> Result<Self> {
        let (ref_minus, ref_zero) = if normalize {
            (peak_normalize(&ref_minus, None)?, peak_normalize(&ref_zero, None)?)
        } else {
            (ref_minus, ref_zero)
        };
        Ok(Self {
            ref_minus,
            ref_zero,
            normalized: normalize,
        })
    }

    /// Same basis with the roles of NV⁻ and NV⁰ exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            ref_minus: self.ref_zero.clone(),
            ref_zero: self.ref_minus.clone(),
            normalized: self.normalized,
        }
    }

    /// Synthetic stand-in basis: a narrow zero-phonon line at 637 nm (NV⁻)
    /// or 575 nm (NV⁰) on top of a broad red-shifted phonon sideband,
    /// sampled every 0.5 nm over 540–800 nm and peak-normalized. Not
    /// measured data.
    pub fn synthetic() -> Self {
        let grid: Vec<f64> = (0..=520).map(|i| 540.0 + 0.5 * i as f64).collect();
        let make = |zpl: f64, sideband: f64, label: &str| {
            let intensity = grid
                .iter()
                .map(|&w| {
                    let line = 0.35 * (-0.5 * ((w - zpl) / 1.2).powi(2)).exp();
                    // Sideband opens at the ZPL and decays slowly to the red.
                    let x = (w - zpl).max(0.0);
                    let band = (1.0 - (-x / 8.0).exp()) * (-0.5 * ((w - sideband) / 38.0).powi(2)).exp();
                    line + band
                })
                .collect();
            Spectrum::new(grid.clone(), intensity, label).expect("synthetic spectrum is valid")
        };
        Self::new(
            make(637.0, 690.0, "synthetic NV-"),
            make(575.0, 625.0, "synthetic NV0"),
            true,
        )
        .expect("synthetic references normalize")
    }
}

/// Outcome of [`fit_fraction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub fraction: f64,
    pub scale: f64,
    pub residual_rms: f64,
    #[serde(rename = "window_nm")]
    pub window: (f64, f64),
    #[serde(rename = "excluded_nm")]
    pub excluded: Vec<(f64, f64)>,
    pub n_points: usize,
}

/// Non-negative least squares in two unknowns, solved exactly.
///
/// Returns `(c1, c2, sum of squared residuals)`.
pub fn nnls2(y: &[f64], b1: &[f64], b2: &[f64]) -> Result<(f64, f64, f64)> {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let g11 = dot(b1, b1);
    let g22 = dot(b2, b2);
    let g12 = dot(b1, b2);
    let r1 = dot(b1, y);
    let r2 = dot(b2, y);
    let det = g11 * g22 - g12 * g12;
    if !(g11 > 0.0 && g22 > 0.0) || det <= 1e-10 * g11 * g22 {
        return Err(Error::Conditioning(format!(
            "reference spectra are linearly dependent on the fit window (Gram determinant {det:e})"
        )));
    }
    let ssr = |c1: f64, c2: f64| {
        y.iter()
            .zip(b1.iter().zip(b2))
            .map(|(y, (a, b))| (y - c1 * a - c2 * b).powi(2))
            .sum::<f64>()
    };
    let c1 = (g22 * r1 - g12 * r2) / det;
    let c2 = (g11 * r2 - g12 * r1) / det;
    if c1 >= 0.0 && c2 >= 0.0 {
        return Ok((c1, c2, ssr(c1, c2)));
    }
    let only_first = ((r1 / g11).max(0.0), 0.0);
    let only_second = (0.0, (r2 / g22).max(0.0));
    let s1 = ssr(only_first.0, only_first.1);
    let s2 = ssr(only_second.0, only_second.1);
    Ok(if s1 <= s2 {
        (only_first.0, only_first.1, s1)
    } else {
        (only_second.0, only_second.1, s2)
    })
}

fn excluded(w: f64, exclusions: &[(f64, f64)]) -> bool {
    exclusions.iter().any(|&(a, b)| w >= a && w <= b)
}

/// Extracts the NV⁻ fraction of `measured` over `window` minus
/// `exclusions`, on the measured wavelength grid.
pub fn fit_fraction(
    measured: &Spectrum,
    refs: &ReferenceSet,
    window: (f64, f64),
    exclusions: &[(f64, f64)],
) -> Result<FitResult> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return domain(format!("degenerate fit window [{lo}, {hi}]"));
    }
    if exclusions.iter().any(|(a, b)| !(a.is_finite() && b.is_finite()) || a > b) {
        return domain("exclusion intervals must be finite with start ≤ end");
    }
    let (mlo, mhi) = measured.span();
    if lo < mlo || hi > mhi {
        return domain(format!(
            "fit window [{lo}, {hi}] lies outside the measured span [{mlo}, {mhi}]"
        ));
    }
    for r in [&refs.ref_minus, &refs.ref_zero] {
        let (rlo, rhi) = r.span();
        if lo < rlo || hi > rhi {
            return domain(format!(
                "reference `{}` spans [{rlo}, {rhi}] and does not cover [{lo}, {hi}]",
                r.label
            ));
        }
    }

    let (grid, y): (Vec<f64>, Vec<f64>) = measured
        .wavelengths
        .iter()
        .zip(&measured.intensities)
        .filter(|(w, _)| **w >= lo && **w <= hi && !excluded(**w, exclusions))
        .map(|(w, i)| (*w, *i))
        .unzip();
    if grid.len() < 3 {
        return domain(format!("only {} usable points in the fit window", grid.len()));
    }
    let b1 = resample(&refs.ref_minus, &grid)?;
    let b2 = resample(&refs.ref_zero, &grid)?;
    let (c1, c2, ssr) = nnls2(&y, &b1.intensities, &b2.intensities)?;
    let scale = c1 + c2;
    if !(scale > 0.0) {
        return Err(Error::Conditioning(
            "measured spectrum has no non-negative component along the basis".into(),
        ));
    }
    Ok(FitResult {
        fraction: c1 / scale,
        scale,
        residual_rms: (ssr / grid.len() as f64).sqrt(),
        window,
        excluded: exclusions.to_vec(),
        n_points: grid.len(),
    })
}
