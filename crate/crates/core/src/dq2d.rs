//! Closed-form double-quantum 2D response of an interacting emitter pair.
//!
//! The interaction parameter is stored as `delta = Delta_s - i Delta_d`
//! (rad/s): the real part shifts the doubly excited level, a positive
//! `Delta_d` broadens it. See [`PairSystem::delta_from_parts`].

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::dipole_coupling;
use crate::ensemble::{nearest_neighbors, Ensemble};
use crate::error::{Error, Result};
use crate::spectrum::{Axis, ComplexSpectrum1D, Spectrum2D};
use crate::textio::fmt_f64;
use crate::units::{ComplexFrequency, HBAR, RAD_PER_THZ};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The four-level joint system of two two-level emitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSystem {
    pub omega_10p: ComplexFrequency,
    pub omega_01p: ComplexFrequency,
    /// C·m
    pub mu_10: f64,
    /// C·m
    pub mu_1p0p: f64,
    /// rad/s, `Delta_s - i Delta_d`.
    pub delta: Complex64,
    /// Ratio of doubly- to singly-excited transition strength; scales the
    /// prefactor only. 1 means equal moments.
    pub doubly_excited_scale: f64,
}

impl PairSystem {
    pub fn new(omega_10p: ComplexFrequency, omega_01p: ComplexFrequency, mu_10: f64, mu_1p0p: f64, delta: Complex64) -> Self {
        Self {
            omega_10p,
            omega_01p,
            mu_10,
            mu_1p0p,
            delta,
            doubly_excited_scale: 1.0,
        }
    }

    /// `Delta_s - i Delta_d` from shift and dephasing, rad/s.
    pub fn delta_from_parts(shift: f64, dephasing: f64) -> Complex64 {
        Complex64::new(shift, -dephasing)
    }

    pub fn delta_shift(&self) -> f64 {
        self.delta.re
    }

    pub fn delta_dephasing(&self) -> f64 {
        -self.delta.im
    }

    pub fn with_delta(mut self, delta: Complex64) -> Self {
        self.delta = delta;
        self
    }

    /// Sum rule for the doubly excited state.
    pub fn omega_11p(&self) -> Complex64 {
        self.omega_10p.complex() + self.omega_01p.complex()
    }

    pub fn prefactor(&self) -> f64 {
        self.doubly_excited_scale * self.mu_10.powi(2) * self.mu_1p0p.powi(2) / (8.0 * HBAR.powi(3))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.omega_10p.omega.is_finite()
            && self.omega_01p.omega.is_finite()
            && self.delta.re.is_finite()
            && self.delta.im.is_finite()
            && self.mu_10.is_finite()
            && self.mu_1p0p.is_finite()
            && self.doubly_excited_scale.is_finite();
        if !finite {
            return Err(Error::invalid("pair parameters must be finite"));
        }
        if self.omega_10p.gamma < 0.0 || self.omega_01p.gamma < 0.0 {
            return Err(Error::invalid("pair dephasing rates must be non-negative"));
        }
        if self.mu_10 < 0.0 || self.mu_1p0p < 0.0 {
            return Err(Error::invalid("dipole moments must be non-negative"));
        }
        Ok(())
    }

    /// Factor depending on `tau` and `omega_T` only, prefactor included.
    pub fn dq_factor(&self, tau: f64, omega_dq: f64) -> Result<Complex64> {
        let o1 = self.omega_10p.complex();
        let o2 = self.omega_01p.complex();
        let coherence = (-I * o1 * tau).exp() + (-I * o2 * tau).exp();
        let den = omega_dq - self.omega_11p() - self.delta;
        if den == Complex64::new(0.0, 0.0) {
            return Err(Error::Pole {
                denominator: "omega_T - Omega_11' - Delta",
            });
        }
        Ok(self.prefactor() * coherence / den)
    }

    /// Bracketed emission factor depending on `omega_t` only. Each pair of
    /// terms cancels exactly when `delta` is zero.
    pub fn emission_factor(&self, omega_em: f64) -> Result<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let d01 = omega_em - self.omega_01p.complex();
        let d10 = omega_em - self.omega_10p.complex();
        let d01s = d01 - self.delta;
        let d10s = d10 - self.delta;
        for (d, name) in [
            (d01, "omega_t - Omega_01'"),
            (d01s, "omega_t - Omega_01' - Delta"),
            (d10, "omega_t - Omega_10'"),
            (d10s, "omega_t - Omega_10' - Delta"),
        ] {
            if d == zero {
                return Err(Error::Pole { denominator: name });
            }
        }
        Ok((d01.inv() - d01s.inv()) + (d10.inv() - d10s.inv()))
    }
}

/// Third-order double-quantum response at one `(omega_T, omega_t)` point
/// (rad/s).
pub fn eq1_response(pair: &PairSystem, tau: f64, omega_dq: f64, omega_em: f64) -> Result<Complex64> {
    Ok(pair.dq_factor(tau, omega_dq)? * pair.emission_factor(omega_em)?)
}

/// Weighted sum of single-pair responses on a THz grid.
pub fn grid_response(pairs: &[(PairSystem, f64)], tau: f64, dq_axis: Axis, emission_axis: Axis) -> Result<Spectrum2D> {
    if pairs.is_empty() {
        return Err(Error::invalid("grid_response needs at least one pair"));
    }
    if !tau.is_finite() {
        return Err(Error::invalid("tau must be finite"));
    }
    let dq = dq_axis.angular();
    let em = emission_axis.angular();
    let factors: Vec<(Vec<Complex64>, Vec<Complex64>)> = pairs
        .par_iter()
        .enumerate()
        .map(|(k, (pair, weight))| {
            let run = || -> Result<_> {
                pair.validate()?;
                let f = dq.iter().map(|w| pair.dq_factor(tau, *w).map(|v| v * *weight)).collect::<Result<Vec<_>>>()?;
                let g = em.iter().map(|w| pair.emission_factor(*w)).collect::<Result<Vec<_>>>()?;
                Ok((f, g))
            };
            run().map_err(|e| Error::Pair {
                index: k,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let cols = em.len();
    let mut values = vec![Complex64::new(0.0, 0.0); dq.len() * cols];
    values.par_chunks_mut(cols).enumerate().for_each(|(r, row)| {
        for (f, g) in &factors {
            let fr = f[r];
            for (v, gc) in row.iter_mut().zip(g) {
                *v += fr * gc;
            }
        }
    });
    let mut s = Spectrum2D::new(dq_axis, emission_axis, values, tau)?;
    s.metadata.set("pairs", pairs.len());
    Ok(s)
}

/// One pair per nearest-neighbour relation (mutual neighbours counted
/// once), with `Delta_s = 2 pi J` from the dipole coupling and a common
/// dephasing `delta_d` (rad/s). Weights are 1.
pub fn pairs_from_ensemble(ensemble: &Ensemble, eps_r: f64, delta_d: f64) -> Result<Vec<(PairSystem, f64)>> {
    let n = ensemble.emitters.len();
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 emitters to form pairs, found {n}")));
    }
    let positions: Vec<_> = ensemble.emitters.iter().map(|e| e.position).collect();
    let mut links: Vec<(usize, usize)> = nearest_neighbors(&positions)
        .into_iter()
        .enumerate()
        .map(|(i, (j, _))| (i.min(j), i.max(j)))
        .collect();
    links.sort_unstable();
    links.dedup();
    links
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (&ensemble.emitters[i], &ensemble.emitters[j]);
            let j_hz = dipole_coupling(&a.dipole_vector(), &b.dipole_vector(), &(b.position - a.position), eps_r)
                .map_err(|e| match e {
                    Error::CoincidentEmitters { separation, .. } => Error::CoincidentEmitters {
                        first: i,
                        second: j,
                        separation,
                    },
                    other => other,
                })?;
            let delta = PairSystem::delta_from_parts(2.0 * std::f64::consts::PI * j_hz, delta_d);
            Ok((
                PairSystem::new(a.bare_frequency, b.bare_frequency, a.dipole_moment, b.dipole_moment, delta),
                1.0,
            ))
        })
        .collect()
}

/// A labelled rectangular region of the `(omega_T, omega_t)` plane, THz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakBox {
    pub label: String,
    pub dq_range: (f64, f64),
    pub emission_range: (f64, f64),
}

impl PeakBox {
    pub fn around(label: impl Into<String>, dq_center: f64, emission_center: f64, half_width: f64) -> Self {
        Self {
            label: label.into(),
            dq_range: (dq_center - half_width, dq_center + half_width),
            emission_range: (emission_center - half_width, emission_center + half_width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrationMode {
    Magnitude,
    Real,
    Imaginary,
}

impl IntegrationMode {
    fn apply(self, v: Complex64) -> f64 {
        match self {
            Self::Magnitude => v.norm(),
            Self::Real => v.re,
            Self::Imaginary => v.im,
        }
    }
}

fn index_range(axis: &Axis, (lo, hi): (f64, f64), what: &str, label: &str) -> Result<(usize, usize)> {
    if !(hi > lo) || !axis.contains(lo) || !axis.contains(hi) {
        return Err(Error::invalid(format!(
            "box `{label}`: {what} range {lo}..{hi} THz is empty or outside the grid {}..{}",
            axis.start,
            axis.last()
        )));
    }
    let tol = 1e-9;
    let first = ((lo - axis.start) / axis.step - tol).ceil().max(0.0) as usize;
    let last = (((hi - axis.start) / axis.step + tol).floor() as usize).min(axis.len - 1);
    if first > last {
        return Err(Error::invalid(format!("box `{label}`: {what} range holds no grid point")));
    }
    Ok((first, last))
}

/// 2D trapezoidal integral (THz^2) of one component over the grid points
/// inside `peak`.
pub fn integrate_peak(spectrum: &Spectrum2D, peak: &PeakBox, mode: IntegrationMode) -> Result<f64> {
    let (r0, r1) = index_range(&spectrum.dq_axis, peak.dq_range, "omega_T", &peak.label)?;
    let (c0, c1) = index_range(&spectrum.emission_axis, peak.emission_range, "omega_t", &peak.label)?;
    let weight = |i: usize, lo: usize, hi: usize| if lo == hi { 0.0 } else if i == lo || i == hi { 0.5 } else { 1.0 };
    let mut total = 0.0;
    for r in r0..=r1 {
        let wr = weight(r, r0, r1);
        if wr == 0.0 {
            continue;
        }
        let row = spectrum.row(r);
        let mut acc = 0.0;
        for c in c0..=c1 {
            acc += weight(c, c0, c1) * mode.apply(row[c]);
        }
        total += wr * acc;
    }
    Ok(total * spectrum.dq_axis.step * spectrum.emission_axis.step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceAxis {
    /// Fix `omega_T`, return a profile along `omega_t`.
    OmegaT,
    /// Fix `omega_t`, return a profile along `omega_T`.
    OmegaEmission,
}

/// Nearest grid line, no interpolation. The chosen line is recorded in the
/// metadata.
pub fn extract_slice(spectrum: &Spectrum2D, fixed: SliceAxis, value_thz: f64) -> Result<ComplexSpectrum1D> {
    let (axis, name) = match fixed {
        SliceAxis::OmegaT => (&spectrum.dq_axis, "omega_T"),
        SliceAxis::OmegaEmission => (&spectrum.emission_axis, "omega_t"),
    };
    let idx = axis.nearest_index(value_thz).ok_or_else(|| {
        Error::invalid(format!(
            "slice at {name} = {value_thz} THz lies outside {}..{}",
            axis.start,
            axis.last()
        ))
    })?;
    let mut s = match fixed {
        SliceAxis::OmegaT => ComplexSpectrum1D::new(spectrum.emission_axis, spectrum.row(idx).to_vec())?,
        SliceAxis::OmegaEmission => ComplexSpectrum1D::new(
            spectrum.dq_axis,
            (0..spectrum.rows()).map(|r| spectrum.at(r, idx)).collect(),
        )?,
    };
    s.metadata.set("slice_axis", name);
    s.metadata.set("slice_index", idx);
    s.metadata.set("slice_value_thz", fmt_f64(axis.value(idx)));
    s.metadata.set("tau_s", fmt_f64(spectrum.tau));
    Ok(s)
}

/// Slice of a single pair evaluated directly along `omega_t` (rad/s axis
/// given in THz).
pub fn direct_slice(pair: &PairSystem, tau: f64, omega_dq: f64, emission_axis: Axis) -> Result<ComplexSpectrum1D> {
    let f = pair.dq_factor(tau, omega_dq)?;
    let values = emission_axis
        .values()
        .map(|w| pair.emission_factor(w * RAD_PER_THZ).map(|g| f * g))
        .collect::<Result<Vec<_>>>()?;
    ComplexSpectrum1D::new(emission_axis, values)
}
