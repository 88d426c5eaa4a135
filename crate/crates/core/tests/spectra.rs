use nvcharge::spectra::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn mixture(refs: &ReferenceSet, fraction: f64, scale: f64) -> Spectrum {
    let w = refs.ref_minus.wavelengths().to_vec();
    let i = refs
        .ref_minus
        .intensities()
        .iter()
        .zip(refs.ref_zero.intensities())
        .map(|(m, z)| scale * (fraction * m + (1.0 - fraction) * z))
        .collect();
    Spectrum::new(w, i, "mixture").unwrap()
}

fn fit(s: &Spectrum, refs: &ReferenceSet) -> FitResult {
    fit_fraction(s, refs, DEFAULT_WINDOW_NM, &[]).unwrap()
}

#[test]
fn reference_mixture_noiseless() {
    let refs = ReferenceSet::synthetic();
    let r = fit(&mixture(&refs, 0.754, 1.0), &refs);
    assert!((r.fraction - 0.754).abs() < 1e-9);
    assert!((r.scale - 1.0).abs() < 1e-9);
    assert!(r.residual_rms < 1e-12);
}

#[test]
fn swapping_the_basis_complements_the_fraction() {
    let refs = ReferenceSet::synthetic();
    for f in [0.0, 0.2, 0.754, 1.0] {
        let s = mixture(&refs, f, 0.8);
        let a = fit(&s, &refs);
        let b = fit(&s, &refs.swapped());
        assert!((a.fraction - (1.0 - b.fraction)).abs() < 1e-12, "{f}: {} vs {}", a.fraction, b.fraction);
        assert!((a.scale - b.scale).abs() < 1e-12);
    }
}

#[test]
fn exclusion_without_points_changes_nothing() {
    let refs = ReferenceSet::synthetic();
    let s = mixture(&refs, 0.4, 2.0);
    let base = fit_fraction(&s, &refs, DEFAULT_WINDOW_NM, &[]).unwrap();
    // The grid is every 0.5 nm, so this interval contains no sample.
    let gap = fit_fraction(&s, &refs, DEFAULT_WINDOW_NM, &[(600.1, 600.4)]).unwrap();
    assert_eq!(base.fraction.to_bits(), gap.fraction.to_bits());
    assert_eq!(base.scale.to_bits(), gap.scale.to_bits());
    assert_eq!(base.residual_rms.to_bits(), gap.residual_rms.to_bits());
    assert_eq!(base.n_points, gap.n_points);
}

#[test]
fn raman_and_etalon_options_shrink_the_fit() {
    let refs = ReferenceSet::synthetic();
    let s = mixture(&refs, 0.6, 1.0);
    let full = fit(&s, &refs);
    let cut = fit_fraction(&s, &refs, (560.0, ETALON_CUTOFF_NM), &[RAMAN_EXCLUSION_NM]).unwrap();
    assert!(cut.n_points < full.n_points);
    assert!((cut.fraction - 0.6).abs() < 1e-9);
}

fn ssr(y: &[f64], b1: &[f64], b2: &[f64], c1: f64, c2: f64) -> f64 {
    y.iter()
        .zip(b1.iter().zip(b2))
        .map(|(y, (a, b))| (y - c1 * a - c2 * b).powi(2))
        .sum()
}

fn windowed(s: &Spectrum) -> Vec<f64> {
    s.wavelengths()
        .iter()
        .zip(s.intensities())
        .filter(|(w, _)| **w >= DEFAULT_WINDOW_NM.0 && **w <= DEFAULT_WINDOW_NM.1)
        .map(|(_, i)| *i)
        .collect()
}

/// Noisy copy of `s`, each point scaled by (1 + 1% gaussian).
fn with_noise(s: &Spectrum, rng: &mut ChaCha8Rng) -> Spectrum {
    let n = Normal::new(0.0, 0.01).unwrap();
    let i = s.intensities().iter().map(|v| v * (1.0 + n.sample(rng))).collect();
    Spectrum::new(s.wavelengths().to_vec(), i, "noisy").unwrap()
}

#[test]
fn perturbing_the_optimum_never_helps() {
    let refs = ReferenceSet::synthetic();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in [0.0, 0.3, 0.754, 1.0] {
        let s = with_noise(&mixture(&refs, f, 1.3), &mut rng);
        let r = fit(&s, &refs);
        let (y, b1, b2) = (windowed(&s), windowed(&refs.ref_minus), windowed(&refs.ref_zero));
        let c1 = r.fraction * r.scale;
        let c2 = r.scale - c1;
        let best = ssr(&y, &b1, &b2, c1, c2);
        for (d1, d2) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3), (1e-3, 1e-3), (-1e-3, -1e-3), (1e-3, -1e-3), (-1e-3, 1e-3)] {
            let (p1, p2) = (c1 + d1, c2 + d2);
            if p1 < 0.0 || p2 < 0.0 {
                continue;
            }
            assert!(ssr(&y, &b1, &b2, p1, p2) >= best, "f = {f}, step ({d1}, {d2})");
        }
    }
}

/// Exhaustive search over fraction and scale on a 1e-3 lattice. For a
/// fixed fraction the objective is quadratic in scale, so each lattice
/// point costs O(1) once the inner products are known.
fn grid_search(y: &[f64], b1: &[f64], b2: &[f64]) -> (f64, f64) {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (g11, g22, g12) = (dot(b1, b1), dot(b2, b2), dot(b1, b2));
    let (r1, r2) = (dot(b1, y), dot(b2, y));
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=1000 {
        let f = i as f64 * 1e-3;
        let q = f * f * g11 + 2.0 * f * (1.0 - f) * g12 + (1.0 - f) * (1.0 - f) * g22;
        let p = f * r1 + (1.0 - f) * r2;
        for j in 500..=1500 {
            let a = j as f64 * 1e-3;
            let cost = a * a * q - 2.0 * a * p;
            if cost < best.0 {
                best = (cost, f, a);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn noisy_reference_mixture_agrees_with_grid_search() {
    let refs = ReferenceSet::synthetic();
    let clean = mixture(&refs, 0.754, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (b1, b2) = (windowed(&refs.ref_minus), windowed(&refs.ref_zero));
    for trial in 0..100 {
        let s = with_noise(&clean, &mut rng);
        let r = fit(&s, &refs);
        assert!((r.fraction - 0.754).abs() <= 0.02, "trial {trial}: {}", r.fraction);
        let (f_grid, a_grid) = grid_search(&windowed(&s), &b1, &b2);
        assert!((r.fraction - f_grid).abs() <= 1.5e-3, "trial {trial}: {} vs grid {f_grid}", r.fraction);
        assert!((r.scale - a_grid).abs() <= 1.5e-3);
    }
}

#[test]
fn measured_file_round_trip() {
    let refs = ReferenceSet::synthetic();
    let mut buf = Vec::new();
    write_spectrum(&mut buf, &refs.ref_minus).unwrap();
    let back = load_spectrum(buf.as_slice(), "copy").unwrap();
    assert_eq!(back.wavelengths(), refs.ref_minus.wavelengths());
    assert_eq!(back.intensities(), refs.ref_minus.intensities());
    let r = fit(&back, &refs);
    assert_eq!(r.fraction, 1.0);
}

#[test]
fn references_on_another_grid_are_resampled() {
    let refs = ReferenceSet::synthetic();
    let mix = mixture(&refs, 0.35, 0.5);
    let coarse_grid: Vec<f64> = (0..=110).map(|i| 550.0 + 2.0 * i as f64).collect();
    let measured = resample(&mix, &coarse_grid).unwrap();
    let r = fit(&measured, &refs);
    assert!((r.fraction - 0.35).abs() < 1e-9);
    assert!((r.scale - 0.5).abs() < 1e-9);
}

#[test]
fn identical_references_are_ill_conditioned() {
    let refs = ReferenceSet::synthetic();
    let twin = ReferenceSet::new(refs.ref_minus.clone(), refs.ref_minus.clone(), true).unwrap();
    let r = fit_fraction(&refs.ref_minus, &twin, DEFAULT_WINDOW_NM, &[]);
    assert!(matches!(r, Err(nvcharge::Error::Conditioning(_))));
}

proptest! {
    #[test]
    fn noiseless_mixtures_invert_exactly(f in 0.0f64..=1.0, a in 0.01f64..100.0) {
        let refs = ReferenceSet::synthetic();
        let r = fit(&mixture(&refs, f, a), &refs);
        prop_assert!((r.fraction - f).abs() < 1e-9);
        prop_assert!((r.scale - a).abs() < 1e-9 * a);
    }

    #[test]
    fn fraction_is_scale_invariant(f in 0.0f64..=1.0, k in 1e-3f64..1e3, seed in 0u64..1000) {
        let refs = ReferenceSet::synthetic();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = with_noise(&mixture(&refs, f, 1.0), &mut rng);
        let a = fit(&s, &refs);
        let b = fit(&s.scaled(k), &refs);
        prop_assert!((a.fraction - b.fraction).abs() < 1e-9);
        prop_assert!((b.scale - k * a.scale).abs() < 1e-9 * k * a.scale.max(1.0));
        prop_assert!((0.0..=1.0).contains(&b.fraction));
    }
}
