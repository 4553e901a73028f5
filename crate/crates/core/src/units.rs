//! Physical constants, unit conversions and complex transition frequencies.
//!
//! Everything inside the crate is SI with angular frequencies in rad/s.
//! Conversions to THz/GHz happen only at file and CLI boundaries.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values (exact where the SI defines them).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysConstants {
    /// F/m
    pub vacuum_permittivity: f64,
    /// J s
    pub planck_h: f64,
    /// J s
    pub hbar: f64,
    /// C m per Debye
    pub debye_to_cm: f64,
    /// m/s
    pub speed_of_light: f64,
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const PLANCK_H: f64 = 6.626_070_15e-34;
pub const HBAR: f64 = PLANCK_H / (2.0 * PI);
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// 1 D = 1e-21 / c  C m
pub const DEBYE: f64 = 1e-21 / SPEED_OF_LIGHT;

pub const CONSTANTS: PhysConstants = PhysConstants {
    vacuum_permittivity: VACUUM_PERMITTIVITY,
    planck_h: PLANCK_H,
    hbar: HBAR,
    debye_to_cm: DEBYE,
    speed_of_light: SPEED_OF_LIGHT,
};

/// rad/s per THz of ordinary frequency.
pub const RAD_PER_THZ: f64 = 2.0 * PI * 1e12;
/// rad/s per GHz of ordinary frequency.
pub const RAD_PER_GHZ: f64 = 2.0 * PI * 1e9;

pub fn thz_to_angular(f_thz: f64) -> f64 {
    f_thz * RAD_PER_THZ
}

pub fn angular_to_thz(omega: f64) -> f64 {
    omega / RAD_PER_THZ
}

pub fn ghz_to_angular(f_ghz: f64) -> f64 {
    f_ghz * RAD_PER_GHZ
}

pub fn angular_to_ghz(omega: f64) -> f64 {
    omega / RAD_PER_GHZ
}

/// Dipole moment in Debye to C m.
pub fn debye_to_si(mu_debye: f64) -> Result<f64> {
    if !(mu_debye >= 0.0) || !mu_debye.is_finite() {
        return Err(Error::invalid(format!(
            "dipole moment must be finite and non-negative, got {mu_debye} D"
        )));
    }
    Ok(mu_debye * DEBYE)
}

pub fn si_to_debye(mu_cm: f64) -> f64 {
    mu_cm / DEBYE
}

/// Ordinary-frequency FWHM (Hz) of the Lorentzian belonging to an
/// amplitude dephasing time `t2` (s): `1 / (pi T2)`.
pub fn lorentzian_fwhm_from_t2(t2: f64) -> Result<f64> {
    if !(t2 > 0.0) || !t2.is_finite() {
        return Err(Error::invalid(format!("T2 must be positive, got {t2} s")));
    }
    Ok(1.0 / (PI * t2))
}

/// Dephasing rate (rad/s) for an amplitude dephasing time `t2`.
pub fn dephasing_rate_from_t2(t2: f64) -> Result<f64> {
    if !(t2 > 0.0) || !t2.is_finite() {
        return Err(Error::invalid(format!("T2 must be positive, got {t2} s")));
    }
    Ok(1.0 / t2)
}

/// A transition frequency with phenomenological dephasing, `Omega = omega - i gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexFrequency {
    /// rad/s
    pub omega: f64,
    /// rad/s
    pub gamma: f64,
}

impl ComplexFrequency {
    pub const fn new(omega: f64, gamma: f64) -> Self {
        Self { omega, gamma }
    }

    pub fn from_thz_ghz(f_thz: f64, gamma_ghz: f64) -> Self {
        Self::new(thz_to_angular(f_thz), ghz_to_angular(gamma_ghz))
    }

    pub fn complex(self) -> Complex64 {
        Complex64::new(self.omega, -self.gamma)
    }

    pub fn is_physical(self) -> bool {
        self.omega.is_finite() && self.gamma.is_finite() && self.gamma >= 0.0
    }
}

impl Add for ComplexFrequency {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self::new(self.omega + rhs.omega, self.gamma + rhs.gamma)
    }
}

impl Sub for ComplexFrequency {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        Self::new(self.omega - rhs.omega, self.gamma - rhs.gamma)
    }
}

impl From<ComplexFrequency> for Complex64 {
    fn from(f: ComplexFrequency) -> Self {
        f.complex()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub refractive_index: f64,
    pub relative_permittivity: f64,
}

impl MaterialParams {
    /// Optical-frequency permittivity `eps_r = n^2`.
    pub fn from_refractive_index(n: f64) -> Result<Self> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::invalid(format!("refractive index must be >= 1, got {n}")));
        }
        Ok(Self {
            refractive_index: n,
            relative_permittivity: n * n,
        })
    }

    /// Diamond at 735 nm.
    pub fn diamond() -> Self {
        Self::from_refractive_index(2.4).expect("constant index")
    }
}
