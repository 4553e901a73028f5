//! Brute-force checks on the closed forms: fixed-step RK4 propagation of
//! the four-level pair density matrix, and a time-domain perturbative
//! double-quantum response transformed to frequency space with an FFT.
//!
//! Basis order is `|00'>, |10'>, |01'>, |11'>`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dq2d::{eq1_response, PairSystem};
use crate::error::{Error, Result};
use crate::spectrum::{Axis, Spectrum2D};
use crate::textio::fmt_f64;
use crate::units::RAD_PER_THZ;

type C = Complex64;
type M4 = Matrix4<C>;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Number of excitations of each basis state.
const EXCITATIONS: [f64; 4] = [0.0, 1.0, 1.0, 2.0];

/// Raising operator summed over both emitters.
fn raising() -> M4 {
    let mut s = M4::zeros();
    s[(1, 0)] = ONE;
    s[(2, 0)] = ONE;
    s[(3, 1)] = ONE;
    s[(3, 2)] = ONE;
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiamondState {
    pub rho: M4,
}

impl DiamondState {
    pub fn ground() -> Self {
        let mut rho = M4::zeros();
        rho[(0, 0)] = ONE;
        Self { rho }
    }

    pub fn population(&self, k: usize) -> f64 {
        self.rho[(k, k)].re
    }

    pub fn trace(&self) -> C {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.rho - self.rho.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (self.rho + self.rho.adjoint()) * C::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.rho - other.rho).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Envelope {
    /// Constant Rabi frequency over `[0, width]`, free evolution after.
    DeltaLike { width: f64 },
    /// Gaussian field envelope with intensity-independent FWHM (s), centred
    /// in the propagation window.
    Gaussian { fwhm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub envelope: Envelope,
    /// Pulse area, rad.
    pub area: f64,
    /// Carrier minus transition frequency, rad/s.
    pub detuning: f64,
    /// Complex shift of `|11'>`, rad/s, `Delta_s - i Delta_d`.
    pub delta: C,
    /// Carrier phase, rad.
    pub phase: f64,
}

impl DriveSpec {
    pub fn delta_pulse(area: f64, width: f64) -> Self {
        Self {
            envelope: Envelope::DeltaLike { width },
            area,
            detuning: 0.0,
            delta: ZERO,
            phase: 0.0,
        }
    }

    fn validate(&self, duration: f64) -> Result<()> {
        if !(self.area >= 0.0) || !self.area.is_finite() {
            return Err(Error::invalid(format!("pulse area must be non-negative, got {}", self.area)));
        }
        if !self.detuning.is_finite() || !self.delta.re.is_finite() || !self.delta.im.is_finite() {
            return Err(Error::invalid("detuning and delta must be finite"));
        }
        match self.envelope {
            Envelope::DeltaLike { width } if !(width > 0.0 && width <= duration) => Err(Error::invalid(format!(
                "delta-like width must lie in (0, duration], got {width}"
            ))),
            Envelope::Gaussian { fwhm } if !(fwhm > 0.0) => {
                Err(Error::invalid(format!("Gaussian FWHM must be positive, got {fwhm}")))
            }
            _ => Ok(()),
        }
    }

    /// Rabi frequency at time `t` in a window of length `duration`.
    fn rabi(&self, t: f64, duration: f64) -> f64 {
        match self.envelope {
            Envelope::DeltaLike { width } => {
                if t <= width {
                    self.area / width
                } else {
                    0.0
                }
            }
            Envelope::Gaussian { fwhm } => {
                let a = 4.0 * std::f64::consts::LN_2;
                let x = t - 0.5 * duration;
                self.area * (a / std::f64::consts::PI).sqrt() / fwhm * (-a * x * x / (fwhm * fwhm)).exp()
            }
        }
    }

    fn peak_rabi(&self, duration: f64) -> f64 {
        match self.envelope {
            Envelope::DeltaLike { .. } => self.rabi(0.0, duration),
            Envelope::Gaussian { .. } => self.rabi(0.5 * duration, duration),
        }
    }

    /// Rotating-frame Hamiltonian, rad/s. Not Hermitian when `Delta_d != 0`.
    fn hamiltonian(&self, rabi: f64) -> M4 {
        let mut h = M4::zeros();
        h[(1, 1)] = C::new(-self.detuning, 0.0);
        h[(2, 2)] = C::new(-self.detuning, 0.0);
        h[(3, 3)] = C::new(-2.0 * self.detuning, 0.0) + self.delta;
        let coupling = raising() * (0.5 * rabi * C::from_polar(1.0, self.phase));
        h + coupling + coupling.adjoint()
    }
}

fn norm_inf(m: &M4) -> f64 {
    (0..4).map(|r| (0..4).map(|c| m[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn rhs(h: &M4, rho: &M4) -> M4 {
    (h * rho - rho * h.adjoint()) * (-I)
}

/// Classical RK4 with fixed steps of at most `dt`. Steps are aligned with
/// the edges of a delta-like pulse.
pub fn propagate(state: &DiamondState, drive: &DriveSpec, duration: f64, dt: f64) -> Result<DiamondState> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("duration and dt must be positive"));
    }
    drive.validate(duration)?;
    if dt > duration / 100.0 {
        return Err(Error::StepTooLarge {
            dt,
            required: duration / 100.0,
        });
    }
    let scale = norm_inf(&drive.hamiltonian(drive.peak_rabi(duration)));
    if dt * scale > 0.05 {
        return Err(Error::StepTooLarge {
            dt,
            required: 0.05 / scale,
        });
    }

    let segments: Vec<(f64, f64)> = match drive.envelope {
        Envelope::DeltaLike { width } if width < duration => vec![(0.0, width), (width, duration)],
        _ => vec![(0.0, duration)],
    };
    let mut rho = state.rho;
    for (t0, t1) in segments {
        let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
        let h_step = (t1 - t0) / n as f64;
        // Evaluate a delta-like envelope inside the segment, never on an edge.
        let inside = |t: f64| t.clamp(t0 + 0.25 * h_step, t1 - 0.25 * h_step);
        let ham = |t: f64| {
            let tt = match drive.envelope {
                Envelope::DeltaLike { .. } => inside(t),
                Envelope::Gaussian { .. } => t,
            };
            drive.hamiltonian(drive.rabi(tt, duration))
        };
        for k in 0..n {
            let t = t0 + k as f64 * h_step;
            let (ha, hb, hc) = (ham(t), ham(t + 0.5 * h_step), ham(t + h_step));
            let k1 = rhs(&ha, &rho);
            let k2 = rhs(&hb, &(rho + k1 * C::new(0.5 * h_step, 0.0)));
            let k3 = rhs(&hb, &(rho + k2 * C::new(0.5 * h_step, 0.0)));
            let k4 = rhs(&hc, &(rho + k3 * C::new(h_step, 0.0)));
            rho += (k1 + k2 * C::new(2.0, 0.0) + k3 * C::new(2.0, 0.0) + k4) * C::new(h_step / 6.0, 0.0);
        }
    }
    Ok(DiamondState { rho })
}

/// `(rho_00', rho_11')` after a resonant delta-like pulse of area `theta`
/// from the ground state, using `steps` RK4 steps across the pulse.
pub fn rabi_populations_oracle(theta: f64, steps_per_pulse: usize) -> Result<(f64, f64)> {
    let width = 1e-15;
    let duration = width * 100.0;
    let drive = DriveSpec::delta_pulse(theta, width);
    let scale = norm_inf(&drive.hamiltonian(drive.peak_rabi(duration)));
    let mut dt = width / steps_per_pulse.max(1) as f64;
    if scale > 0.0 {
        dt = dt.min(0.05 / scale);
    }
    let s = propagate(&DiamondState::ground(), &drive, duration, dt)?;
    Ok((s.population(0), s.population(3)))
}

/// Sampling of the two delays after the second and third pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub n_dq: usize,
    /// s
    pub step_dq: f64,
    pub n_em: usize,
    /// s
    pub step_em: f64,
}

/// Complex frequency of every coherence `|a><b|` under free evolution:
/// each emitter contributes `Omega` when excited in the ket only, and
/// `-conj(Omega)` when excited in the bra only; `Delta` enters for `|11'>`.
fn coherence_frequencies(pair: &PairSystem, omega_ref: f64) -> M4 {
    let o1 = pair.omega_10p.complex() - omega_ref;
    let o2 = pair.omega_01p.complex() - omega_ref;
    let excited = |state: usize, emitter: usize| match emitter {
        0 => state == 1 || state == 3,
        _ => state == 2 || state == 3,
    };
    M4::from_fn(|a, b| {
        let mut w = ZERO;
        for (e, o) in [(0, o1), (1, o2)] {
            match (excited(a, e), excited(b, e)) {
                (true, false) => w += o,
                (false, true) => w -= o.conj(),
                _ => {}
            }
        }
        if a == 3 {
            w += pair.delta;
        }
        if b == 3 {
            w -= pair.delta.conj();
        }
        w
    })
}

fn evolution_factors(lambda: &M4, t: f64) -> M4 {
    lambda.map(|l| (-I * l * t).exp())
}

fn free(lambda: &M4, rho: &M4, t: f64) -> M4 {
    rho.component_mul(&evolution_factors(lambda, t))
}

/// First-order action of one pulse with unit area, keeping the component
/// that carries `+phase` (`raise = true`) or `-phase`.
fn pulse(rho: &M4, raise: bool, phase: f64) -> M4 {
    let s = if raise { raising() } else { raising().adjoint() };
    let sign = if raise { 1.0 } else { -1.0 };
    (s * rho - rho * s) * (-I * 0.5 * C::from_polar(1.0, sign * phase))
}

fn check_window(rate: f64, step: f64, n: usize, what: &str) -> Result<()> {
    if !(rate > 0.0) {
        return Err(Error::invalid(format!("{what}: coherence does not decay (rate {rate})")));
    }
    let remaining = (-rate * step * (n - 1) as f64).exp();
    if remaining >= 1e-4 {
        let required_points = ((1e4f64).ln() / (rate * step)).ceil() as usize + 1;
        return Err(Error::WindowTooShort {
            remaining,
            required_points,
        });
    }
    Ok(())
}

/// Trapezoid weights for a one-sided signal starting at zero delay.
fn trapezoid_weight(k: usize) -> f64 {
    if k == 0 {
        0.5
    } else {
        1.0
    }
}

fn shifted_axis(n: usize, step: f64, center_thz: f64) -> Result<Axis> {
    let df = 1.0 / (n as f64 * step) * 1e-12;
    Axis::new(center_thz - (n / 2) as f64 * df, df, n)
}

/// Perturbative double-quantum spectrum of one pair from explicit pulse
/// sequence bookkeeping. Pulses are instantaneous, of unit area, with
/// phases `phases`; only the `+ + - -` phase signature is kept. The
/// population after the fourth pulse is transformed over both delays.
/// The result is scaled so that it estimates the closed form directly.
pub fn perturbative_dq2d(
    pair: &PairSystem,
    tau: f64,
    grid: &TimeGrid,
    omega_ref: Option<f64>,
    phases: [f64; 4],
) -> Result<Spectrum2D> {
    pair.validate()?;
    if grid.n_dq < 4 || grid.n_em < 4 || !(grid.step_dq > 0.0) || !(grid.step_em > 0.0) || !(tau >= 0.0) {
        return Err(Error::invalid("time grid needs >= 4 points, positive steps and tau >= 0"));
    }
    let w_ref = omega_ref.unwrap_or(0.5 * (pair.omega_10p.omega + pair.omega_01p.omega));
    let lambda = coherence_frequencies(pair, w_ref);

    let dq_rate = -lambda[(3, 0)].im;
    check_window(dq_rate, grid.step_dq, grid.n_dq, "double-quantum delay")?;
    let em_rate = [(1, 0), (2, 0), (3, 1), (3, 2)]
        .iter()
        .map(|&(a, b)| -lambda[(a, b)].im)
        .fold(f64::INFINITY, f64::min);
    check_window(em_rate, grid.step_em, grid.n_em, "emission delay")?;

    let mut rho = DiamondState::ground().rho;
    rho = pulse(&rho, true, phases[0]);
    rho = free(&lambda, &rho, tau);
    rho = pulse(&rho, true, phases[1]);
    // Undo the rotating frame for the first delay only.
    rho *= (-I * w_ref * tau).exp();

    let number = M4::from_diagonal(&nalgebra::Vector4::from_fn(|k, _| C::new(EXCITATIONS[k], 0.0)));
    let (n_dq, n_em) = (grid.n_dq, grid.n_em);
    let em_factors: Vec<M4> = (0..n_em)
        .map(|c| evolution_factors(&lambda, c as f64 * grid.step_em) * C::new(trapezoid_weight(c), 0.0))
        .collect();
    let mut data = vec![ZERO; n_dq * n_em];
    data.par_chunks_mut(n_em).enumerate().for_each(|(r, row)| {
        let t_dq = r as f64 * grid.step_dq;
        let after3 = pulse(&free(&lambda, &rho, t_dq), false, phases[2]) * C::new(trapezoid_weight(r), 0.0);
        for (v, f) in row.iter_mut().zip(&em_factors) {
            let after4 = pulse(&after3.component_mul(f), false, phases[3]);
            *v = (number * after4).trace();
        }
    });

    // Positive-exponent transforms along both axes.
    let mut planner = FftPlanner::<f64>::new();
    let fft_em = planner.plan_fft(n_em, FftDirection::Inverse);
    let fft_dq = planner.plan_fft(n_dq, FftDirection::Inverse);
    for row in data.chunks_mut(n_em) {
        fft_em.process(row);
    }
    let mut column = vec![ZERO; n_dq];
    for c in 0..n_em {
        for r in 0..n_dq {
            column[r] = data[r * n_em + c];
        }
        fft_dq.process(&mut column);
        for r in 0..n_dq {
            data[r * n_em + c] = column[r];
        }
    }

    // Reorder to increasing frequency and scale.
    let scale = 16.0 * pair.prefactor() * grid.step_dq * grid.step_em;
    let mut values = vec![ZERO; n_dq * n_em];
    for r in 0..n_dq {
        let src_r = (r + n_dq - n_dq / 2) % n_dq;
        for c in 0..n_em {
            let src_c = (c + n_em - n_em / 2) % n_em;
            values[r * n_em + c] = data[src_r * n_em + src_c] * scale;
        }
    }
    let f_ref = w_ref / RAD_PER_THZ;
    let dq_axis = shifted_axis(n_dq, grid.step_dq, 2.0 * f_ref)?;
    let em_axis = shifted_axis(n_em, grid.step_em, f_ref)?;
    let mut s = Spectrum2D::new(dq_axis, em_axis, values, tau)?;
    s.metadata.set("source", "oracle");
    s.metadata.set("omega_ref_thz", fmt_f64(f_ref));
    Ok(s)
}

/// Relative RMS difference `sqrt(sum |a-b|^2 / sum |b|^2)` between an
/// oracle spectrum and the closed form on its own grid, restricted to
/// `|f_T - center_T| <= half_T` and `|f_t - center_t| <= half_t` (THz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crop {
    pub center_dq: f64,
    pub half_dq: f64,
    pub center_em: f64,
    pub half_em: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub rms_relative: f64,
    pub points: usize,
    pub closed_form_max: f64,
}

pub fn compare_with_closed_form(oracle: &Spectrum2D, pair: &PairSystem, crop: &Crop) -> Result<Comparison> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut points = 0;
    let mut closed_form_max: f64 = 0.0;
    for r in 0..oracle.rows() {
        let f_dq = oracle.dq_axis.value(r);
        if (f_dq - crop.center_dq).abs() > crop.half_dq {
            continue;
        }
        for c in 0..oracle.cols() {
            let f_em = oracle.emission_axis.value(c);
            if (f_em - crop.center_em).abs() > crop.half_em {
                continue;
            }
            let exact = eq1_response(pair, oracle.tau, f_dq * RAD_PER_THZ, f_em * RAD_PER_THZ)?;
            num += (oracle.at(r, c) - exact).norm_sqr();
            den += exact.norm_sqr();
            closed_form_max = closed_form_max.max(exact.norm());
            points += 1;
        }
    }
    if points == 0 {
        return Err(Error::invalid("comparison crop holds no grid points"));
    }
    let rms_relative = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    Ok(Comparison {
        rms_relative,
        points,
        closed_form_max,
    })
}
