//! Linear (PL-detected absorption) spectra: unit-peak Lorentzians at the
//! interaction-shifted line centers, averaged over ensemble realizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{bare_weights, build_coupling_matrix, diagonalize_single_excitation, ShiftedSpectrumLines, WeightRule};
use crate::ensemble::{sample_ensemble, Ensemble, EnsembleConfig, PeakLabel};
use crate::error::{Error, Result};
use crate::spectrum::{Axis, Spectrum1D};
use crate::textio::fmt_f64;
use crate::units::{lorentzian_fwhm_from_t2, RAD_PER_THZ};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearOptions {
    pub eps_r: f64,
    /// Off: every emitter keeps its bare frequency.
    pub interactions: bool,
    /// Pedestal emitters still couple but do not emit.
    pub dark_pedestal: bool,
    pub weight_rule: WeightRule,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            eps_r: 2.4 * 2.4,
            interactions: true,
            dark_pedestal: false,
            weight_rule: WeightRule::Incoherent,
        }
    }
}

/// Unit-peak Lorentzian.
pub fn lorentzian(f: f64, center: f64, fwhm: f64) -> f64 {
    let hw = 0.5 * fwhm;
    hw * hw / ((f - center).powi(2) + hw * hw)
}

/// Sum of weighted unit-peak Lorentzians with FWHM `1/(pi T2)` on `grid`.
/// Lines closer than 5 FWHM to either grid edge set a `grid_warning`
/// metadata entry.
pub fn synthesize_linear(lines: &ShiftedSpectrumLines, t2: f64, grid: Axis) -> Result<Spectrum1D> {
    let fwhm_thz = lorentzian_fwhm_from_t2(t2)? * 1e-12;
    let centers: Vec<f64> = lines.line_centers.iter().map(|w| w / RAD_PER_THZ).collect();
    let weights = &lines.line_weights;
    let amplitude: Vec<f64> = (0..grid.len)
        .into_par_iter()
        .map(|i| {
            let f = grid.value(i);
            centers
                .iter()
                .zip(weights)
                .map(|(c, w)| w * lorentzian(f, *c, fwhm_thz))
                .sum()
        })
        .collect();
    let mut spec = Spectrum1D::new(grid, amplitude)?;
    spec.metadata.set("t2_s", fmt_f64(t2));
    spec.metadata.set("fwhm_ghz", fmt_f64(fwhm_thz * 1e3));
    spec.metadata.set("lines", lines.len());
    let margin = 5.0 * fwhm_thz;
    let uncovered = centers
        .iter()
        .filter(|c| **c < grid.start + margin || **c > grid.last() - margin)
        .count();
    if uncovered > 0 {
        spec.metadata.set(
            "grid_warning",
            format!("{uncovered} line(s) within 5 FWHM of the grid edge or outside it"),
        );
    }
    Ok(spec)
}

/// Shifted lines of one realization.
pub fn ensemble_lines(ensemble: &Ensemble, opts: &LinearOptions) -> Result<ShiftedSpectrumLines> {
    let weights = bare_weights(ensemble, opts.dark_pedestal);
    if !opts.interactions {
        let centers: Vec<f64> = ensemble.emitters.iter().map(|e| e.bare_frequency.omega).collect();
        return Ok(ShiftedSpectrumLines::bare(&centers, &weights));
    }
    let matrix = build_coupling_matrix(ensemble, opts.eps_r)?;
    diagonalize_single_excitation(&matrix, &weights, opts.weight_rule)
}

/// Interaction shift (rad/s) of every line, tagged with the label of its
/// dominant emitter.
pub fn line_shifts(ensemble: &Ensemble, lines: &ShiftedSpectrumLines) -> Vec<(PeakLabel, f64)> {
    lines
        .line_centers
        .iter()
        .zip(&lines.dominant_emitter)
        .map(|(c, &k)| {
            let e = &ensemble.emitters[k];
            (e.label, c - e.bare_frequency.omega)
        })
        .collect()
}

/// Configuration for realization `k`: seed `base + k`.
pub fn realization_config(config: &EnsembleConfig, k: usize) -> EnsembleConfig {
    EnsembleConfig {
        seed: config.seed.wrapping_add(k as u64),
        ..config.clone()
    }
}

/// Arithmetic mean of `n_realizations` single-realization spectra.
pub fn ensemble_average_spectrum(
    config: &EnsembleConfig,
    n_realizations: usize,
    opts: &LinearOptions,
    grid: Axis,
) -> Result<Spectrum1D> {
    if n_realizations == 0 {
        return Err(Error::invalid("need at least one realization"));
    }
    let t2 = config.t2_ps * 1e-12;
    let spectra: Vec<Spectrum1D> = (0..n_realizations)
        .into_par_iter()
        .map(|k| {
            let run = || -> Result<Spectrum1D> {
                let ens = sample_ensemble(&realization_config(config, k))?;
                synthesize_linear(&ensemble_lines(&ens, opts)?, t2, grid)
            };
            run().map_err(|e| Error::Realization {
                index: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut total = vec![0.0; grid.len];
    for s in &spectra {
        for (t, a) in total.iter_mut().zip(&s.amplitude) {
            *t += a;
        }
    }
    let n = n_realizations as f64;
    let mut out = Spectrum1D::new(grid, total.into_iter().map(|v| v / n).collect())?;
    out.metadata.set("realizations", n_realizations);
    out.metadata.set("base_seed", config.seed);
    out.metadata.set("t2_s", fmt_f64(t2));
    out.metadata.set("interactions", opts.interactions);
    out.metadata.set("dark_pedestal", opts.dark_pedestal);
    if let Some(w) = spectra.iter().find_map(|s| s.metadata.get("grid_warning")) {
        out.metadata.set("grid_warning", w);
    }
    Ok(out)
}

/// Full width at half maximum of the tallest feature, THz, by linear
/// interpolation between grid points.
pub fn fwhm_of_peak(spec: &Spectrum1D) -> Option<f64> {
    let (imax, &peak) = spec
        .amplitude
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = 0.5 * peak;
    let a = &spec.amplitude;
    let mut lo = imax;
    while lo > 0 && a[lo] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < a.len() && a[hi] > half {
        hi += 1;
    }
    if a[lo] > half || a[hi] > half {
        return None;
    }
    let x = |i: usize| spec.axis.value(i);
    let left = x(lo) + (half - a[lo]) / (a[lo + 1] - a[lo]) * spec.axis.step;
    let right = x(hi - 1) + (a[hi - 1] - half) / (a[hi - 1] - a[hi]) * spec.axis.step;
    Some(right - left)
}

/// Simulated versus measured spectrum, both scaled to unit maximum.
#[derive(Debug, Clone)]
pub struct OverlayReport {
    /// Columns: measured, simulated, measured - simulated, on the measured axis.
    pub rows: Vec<[f64; 4]>,
    pub rms_residual: f64,
    pub max_abs_residual: f64,
}

pub fn overlay(simulated: &Spectrum1D, measured: &Spectrum1D) -> Result<OverlayReport> {
    let norm = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (ms, ss) = (norm(&measured.amplitude), norm(&simulated.amplitude));
    if !(ms > 0.0) || !(ss > 0.0) {
        return Err(Error::invalid("overlay needs spectra with a positive maximum"));
    }
    let sim_axis = simulated.axis;
    let mut rows = Vec::with_capacity(measured.axis.len);
    for (i, m) in measured.amplitude.iter().enumerate() {
        let f = measured.axis.value(i);
        if !sim_axis.contains(f) {
            return Err(Error::invalid(format!("measured point {f} THz lies outside the simulated grid")));
        }
        let mut x = ((f - sim_axis.start) / sim_axis.step).clamp(0.0, (sim_axis.len - 1) as f64);
        if (x - x.round()).abs() < 1e-6 {
            x = x.round();
        }
        let k = (x.floor() as usize).min(sim_axis.len.saturating_sub(2));
        let t = x - k as f64;
        let s = if sim_axis.len == 1 {
            simulated.amplitude[0]
        } else {
            simulated.amplitude[k] * (1.0 - t) + simulated.amplitude[k + 1] * t
        };
        let (mn, sn) = (m / ms, s / ss);
        rows.push([f, mn, sn, mn - sn]);
    }
    let rms_residual = (rows.iter().map(|r| r[3] * r[3]).sum::<f64>() / rows.len() as f64).sqrt();
    let max_abs_residual = rows.iter().map(|r| r[3].abs()).fold(0.0, f64::max);
    Ok(OverlayReport {
        rows,
        rms_residual,
        max_abs_residual,
    })
}
