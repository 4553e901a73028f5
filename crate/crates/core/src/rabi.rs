//! Pump-field dependence: pair populations versus pulse area, the
//! pump-dependent interaction parameter, and pulse-area bookkeeping.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dq2d::PairSystem;
use crate::error::{Error, Result};
use crate::spectrum::{Axis, ComplexSpectrum1D};
use crate::units::{HBAR, SPEED_OF_LIGHT, VACUUM_PERMITTIVITY};

/// Ground and doubly excited populations after a resonant pulse of area
/// `theta` acting on both emitters.
pub fn rabi_populations(theta: f64) -> (f64, f64) {
    let (s, c) = (0.5 * theta).sin_cos();
    (c.powi(4), s.powi(4))
}

/// How `E/E_pi` enters the trigonometric factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpArgument {
    /// `x = (pi/2) E/E_pi`: first null exactly at `E = E_pi`.
    #[default]
    HalfPi,
    /// `x = E/E_pi` as written.
    Literal,
}

/// Overall amplitude versus pump field.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeLaw {
    /// `cos^4(x)`, coherent Rabi oscillation of resonant pairs.
    #[default]
    Rabi,
    /// `1 - s E^2/(E^2 + E_sat^2)` with `E` in units of `E_pi`. The
    /// interaction parameter stays at its zero-pump value.
    Saturation { strength: f64, e_sat: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpModel {
    /// Field at which the pulse area is pi, same units as the sweep values.
    pub e_pi: f64,
    /// rad/s
    pub delta_s0: f64,
    pub delta_d0: f64,
    pub delta_s1: f64,
    pub delta_d1: f64,
    pub amplitude: Complex64,
    pub argument: PumpArgument,
    pub law: AmplitudeLaw,
}

impl PumpModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_pi > 0.0) || !self.e_pi.is_finite() {
            return Err(Error::invalid(format!("E_pi must be positive, got {}", self.e_pi)));
        }
        let all = [self.delta_s0, self.delta_d0, self.delta_s1, self.delta_d1, self.amplitude.re, self.amplitude.im];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("pump model parameters must be finite"));
        }
        if let AmplitudeLaw::Saturation { strength, e_sat } = self.law {
            if !(0.0..=1.0).contains(&strength) || !(e_sat > 0.0) {
                return Err(Error::invalid("saturation needs strength in [0, 1] and e_sat > 0"));
            }
        }
        Ok(())
    }

    /// Excitation-induced narrowing is allowed but worth flagging.
    pub fn dephasing_warning(&self) -> Option<String> {
        let total = self.delta_d0 + self.delta_d1.max(0.0);
        (total < 0.0).then(|| format!("total interaction dephasing is negative ({total} rad/s)"))
    }

    pub fn argument(&self, e: f64) -> f64 {
        let r = e / self.e_pi;
        match self.argument {
            PumpArgument::HalfPi => 0.5 * std::f64::consts::PI * r,
            PumpArgument::Literal => r,
        }
    }

    pub fn delta0(&self) -> Complex64 {
        PairSystem::delta_from_parts(self.delta_s0, self.delta_d0)
    }

    pub fn delta1(&self) -> Complex64 {
        PairSystem::delta_from_parts(self.delta_s1, self.delta_d1)
    }

    /// Real amplitude factor at field `e`.
    pub fn amplitude_factor(&self, e: f64) -> f64 {
        match self.law {
            AmplitudeLaw::Rabi => self.argument(e).cos().powi(4),
            AmplitudeLaw::Saturation { strength, e_sat } => {
                let r = e / self.e_pi;
                1.0 - strength * r * r / (r * r + e_sat * e_sat)
            }
        }
    }
}

/// Interaction parameter at pump field `e`.
pub fn pump_delta(e: f64, model: &PumpModel) -> Complex64 {
    match model.law {
        AmplitudeLaw::Rabi => model.delta0() + model.argument(e).sin().powi(4) * model.delta1(),
        AmplitudeLaw::Saturation { .. } => model.delta0(),
    }
}

/// Slice values on an angular emission axis (rad/s).
pub fn pumped_slice_values(
    e: f64,
    model: &PumpModel,
    pair: &PairSystem,
    emission: &[f64],
    omega_dq: f64,
    tau: f64,
) -> Result<Vec<Complex64>> {
    let p = pair.with_delta(pump_delta(e, model));
    let scale = model.amplitude * model.amplitude_factor(e) * p.dq_factor(tau, omega_dq)?;
    emission.iter().map(|w| p.emission_factor(*w).map(|g| scale * g)).collect()
}

/// Pump-dependent slice along `omega_t` (axis in THz) at fixed `omega_T`
/// (rad/s).
pub fn pumped_signal_model(
    e: f64,
    model: &PumpModel,
    pair: &PairSystem,
    emission_axis: Axis,
    omega_dq: f64,
    tau: f64,
) -> Result<ComplexSpectrum1D> {
    let em = emission_axis.angular();
    ComplexSpectrum1D::new(emission_axis, pumped_slice_values(e, model, pair, &em, omega_dq, tau)?)
}

/// Field transmission into a medium of index `n` at normal incidence.
pub fn fresnel_field_transmission(n: f64) -> f64 {
    2.0 / (1.0 + n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub rep_rate_hz: f64,
    /// Intensity FWHM, s.
    pub fwhm_duration_s: f64,
    /// C·m
    pub dipole_moment: f64,
    /// 1/e^2 intensity diameter, m.
    pub spot_diameter_m: f64,
    /// Multiplies the vacuum field amplitude.
    pub field_correction: f64,
}

impl PulseParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rep_rate_hz", self.rep_rate_hz),
            ("fwhm_duration_s", self.fwhm_duration_s),
            ("dipole_moment", self.dipole_moment),
            ("spot_diameter_m", self.spot_diameter_m),
            ("field_correction", self.field_correction),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("pulse parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Peak field amplitude (V/m) at average power `power` (W).
    pub fn peak_field(&self, power: f64) -> f64 {
        let ln2 = std::f64::consts::LN_2;
        let pi = std::f64::consts::PI;
        let energy = power / self.rep_rate_hz;
        let t_eff = self.fwhm_duration_s * (pi / (4.0 * ln2)).sqrt();
        let w = 0.5 * self.spot_diameter_m;
        let area = 0.5 * pi * w * w;
        let intensity = energy / (t_eff * area);
        self.field_correction * (2.0 * intensity / (SPEED_OF_LIGHT * VACUUM_PERMITTIVITY)).sqrt()
    }
}

/// Pulse area `(mu/hbar) * integral of E dt` for a Gaussian pulse at
/// average power `power` (W).
pub fn area_from_power(power: f64, params: &PulseParams) -> Result<f64> {
    params.validate()?;
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!("power must be non-negative, got {power}")));
    }
    let ln2 = std::f64::consts::LN_2;
    let field_integral = params.peak_field(power) * params.fwhm_duration_s * (std::f64::consts::PI / (2.0 * ln2)).sqrt();
    Ok(params.dipole_moment / HBAR * field_integral)
}

/// Average power giving pulse area pi.
pub fn pi_power(params: &PulseParams) -> Result<f64> {
    let theta1 = area_from_power(1.0, params)?;
    Ok((std::f64::consts::PI / theta1).powi(2))
}

/// Spot diameter (m) for which `power` gives pulse area pi. The area scales
/// as the inverse diameter.
pub fn spot_for_pi(power: f64, params: &PulseParams) -> Result<f64> {
    if !(power > 0.0) {
        return Err(Error::invalid(format!("power must be positive, got {power}")));
    }
    let theta = area_from_power(power, params)?;
    Ok(params.spot_diameter_m * theta / std::f64::consts::PI)
}

/// Average power (W) for a given pump field normalized to `E_pi`.
pub fn power_from_field(e_over_epi: f64, p_pi: f64) -> f64 {
    p_pi * e_over_epi * e_over_epi
}

/// Normalized pump field for average power `power` (W).
pub fn field_from_power(power: f64, p_pi: f64) -> f64 {
    (power / p_pi).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{debye_to_si, ghz_to_angular, ComplexFrequency};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn reference_model() -> PumpModel {
        PumpModel {
            e_pi: 1.0,
            delta_s0: ghz_to_angular(6.0),
            delta_d0: ghz_to_angular(2.0),
            delta_s1: ghz_to_angular(-200.0),
            delta_d1: ghz_to_angular(50.0),
            amplitude: Complex64::new(1.0, 0.0),
            argument: PumpArgument::HalfPi,
            law: AmplitudeLaw::Rabi,
        }
    }

    fn pulse(spot: f64) -> PulseParams {
        PulseParams {
            rep_rate_hz: 75.5e6,
            fwhm_duration_s: 200e-15,
            dipole_moment: debye_to_si(14.3).unwrap(),
            spot_diameter_m: spot,
            field_correction: fresnel_field_transmission(2.4),
        }
    }

    #[test]
    fn population_examples() {
        let close = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15;
        assert!(close(rabi_populations(0.0), (1.0, 0.0)));
        assert!(close(rabi_populations(PI), (0.0, 1.0)));
        assert!(close(rabi_populations(PI / 2.0), (0.25, 0.25)));
    }

    proptest! {
        #[test]
        fn populations_and_single_share_sum_to_one(theta in 0.0f64..20.0) {
            let (g, d) = rabi_populations(theta);
            prop_assert!((g + d + 0.5 * theta.sin().powi(2) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pump_model_has_period_two_e_pi(e in 0.0f64..4.0) {
            let m = reference_model();
            prop_assert!((m.amplitude_factor(e) - m.amplitude_factor(e + 2.0)).abs() < 1e-12);
            let (a, b) = (pump_delta(e, &m), pump_delta(e + 2.0, &m));
            prop_assert!((a - b).norm() <= 1e-12 * m.delta1().norm());
        }

        #[test]
        fn area_scales_as_root_power(p in 1e-6f64..1.0) {
            let params = pulse(20e-6);
            let r = area_from_power(4.0 * p, &params).unwrap() / area_from_power(p, &params).unwrap();
            prop_assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pump_delta_examples() {
        let m = reference_model();
        let g = ghz_to_angular(1.0);
        let close = |a: Complex64, re: f64, im: f64| (a - Complex64::new(re * g, im * g)).norm() < 1e-9 * g;
        assert!(close(pump_delta(0.0, &m), 6.0, -2.0));
        assert!(close(pump_delta(1.0, &m), -194.0, -52.0));
        assert!(close(pump_delta(0.5, &m), 6.0 - 50.0, -2.0 - 12.5));
        let lit = PumpModel {
            argument: PumpArgument::Literal,
            ..m
        };
        let x: f64 = 1.0;
        assert!(close(pump_delta(1.0, &lit), 6.0 - 200.0 * x.sin().powi(4), -2.0 - 50.0 * x.sin().powi(4)));
        assert!(m.dephasing_warning().is_none());
        let narrowing = PumpModel {
            delta_d0: -ghz_to_angular(3.0),
            delta_d1: -ghz_to_angular(1.0),
            ..m
        };
        assert!(narrowing.dephasing_warning().is_some());
    }

    #[test]
    fn signal_model_examples() {
        let m = reference_model();
        let w = ComplexFrequency::from_thz_ghz(408.0, 1.33);
        let pair = PairSystem::new(w, w, 1.0, 1.0, Complex64::new(0.0, 0.0));
        let axis = Axis::linspace(407.7, 408.3, 121).unwrap();
        let w_dq = 2.0 * w.omega + ghz_to_angular(6.0);
        let s0 = pumped_signal_model(0.0, &m, &pair, axis, w_dq, 0.0).unwrap();
        let direct = crate::dq2d::direct_slice(&pair.with_delta(m.delta0()), 0.0, w_dq, axis).unwrap();
        assert_eq!(s0.amplitude, direct.amplitude);
        let s1 = pumped_signal_model(1.0, &m, &pair, axis, w_dq, 0.0).unwrap();
        let peak0 = s0.amplitude.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(s1.amplitude.iter().all(|v| v.norm() < 1e-30 * peak0.max(1.0)));
        let s2 = pumped_signal_model(2.0, &m, &pair, axis, w_dq, 0.0).unwrap();
        for (a, b) in s2.amplitude.iter().zip(&s0.amplitude) {
            assert!((a - b).norm() <= 1e-9 * peak0);
        }
    }

    #[test]
    fn saturation_law_is_monotone() {
        let m = PumpModel {
            law: AmplitudeLaw::Saturation { strength: 0.8, e_sat: 0.7 },
            ..reference_model()
        };
        m.validate().unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=200 {
            let f = m.amplitude_factor(k as f64 * 0.02);
            assert!(f <= prev);
            prev = f;
        }
        assert_eq!(pump_delta(1.3, &m), m.delta0());
        let bad = PumpModel {
            law: AmplitudeLaw::Saturation { strength: 1.5, e_sat: 0.7 },
            ..reference_model()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn power_inversions() {
        let params = pulse(20e-6);
        assert_eq!(area_from_power(0.0, &params).unwrap(), 0.0);
        let p_pi = pi_power(&params).unwrap();
        assert!((area_from_power(p_pi, &params).unwrap() / PI - 1.0).abs() < 1e-12);
        assert!(area_from_power(-1.0, &params).is_err());
        assert!(area_from_power(1.0, &pulse(0.0)).is_err());
        assert!((field_from_power(power_from_field(0.7, p_pi), p_pi) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn spot_inversion_matches_bisection() {
        let p = 11.4e-3;
        let closed = spot_for_pi(p, &pulse(10e-6)).unwrap();
        // Bisection on the forward formula alone.
        let (mut lo, mut hi) = (1e-8f64, 1e-2f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if area_from_power(p, &pulse(mid)).unwrap() > PI {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((closed / lo - 1.0).abs() < 1e-9, "{closed} vs {lo}");
        assert!(closed > 0.5e-6 && closed < 50e-6, "{closed}");
    }
}
