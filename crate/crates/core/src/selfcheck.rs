//! Fast invariant suites bundled with the binary.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling::{diagonalize_single_excitation, dipole_coupling, nearest_neighbor_couplings, CouplingMatrix, WeightRule};
use crate::dq2d::{eq1_response, PairSystem};
use crate::ensemble::{median, sample_ensemble, EnsembleConfig};
use crate::error::Result;
use crate::linear::realization_config;
use crate::oracle::{compare_with_closed_form, perturbative_dq2d, rabi_populations_oracle, Crop, TimeGrid};
use crate::rabi::rabi_populations;
use crate::units::{debye_to_si, ComplexFrequency, RAD_PER_GHZ, RAD_PER_THZ};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn outcome(name: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { name, passed, detail }
}

/// Random pairs with no interaction give an exactly zero grid.
pub fn background_free(n_pairs: usize, n_grid: usize, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_pairs {
        let f1 = 406.0 + rng.random::<f64>();
        let f2 = 406.0 + rng.random::<f64>();
        let pair = PairSystem::new(
            ComplexFrequency::from_thz_ghz(f1, rng.random_range(0.1..10.0)),
            ComplexFrequency::from_thz_ghz(f2, rng.random_range(0.1..10.0)),
            debye_to_si(rng.random_range(1.0..20.0))?,
            debye_to_si(rng.random_range(1.0..20.0))?,
            Complex64::new(0.0, 0.0),
        );
        let tau = rng.random_range(0.0..1e-11);
        for i in 0..n_grid {
            let w_dq = (f1 + f2 - 0.5 + i as f64 / n_grid as f64) * RAD_PER_THZ;
            for j in 0..n_grid {
                let w_em = (405.8 + 1.4 * j as f64 / n_grid as f64) * RAD_PER_THZ;
                worst = worst.max(eq1_response(&pair, tau, w_dq, w_em)?.norm());
            }
        }
    }
    Ok(outcome(
        "background-free cancellation",
        worst == 0.0,
        format!("{n_pairs} pairs on {n_grid}x{n_grid}, max |S| = {worst:e}"),
    ))
}

/// Four-level propagation against the closed-form populations.
pub fn rabi_oracle(points: usize, steps_per_pulse: usize) -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let theta = 2.0 * PI * k as f64 / (points - 1) as f64;
        let (g, d) = rabi_populations_oracle(theta, steps_per_pulse)?;
        let (g0, d0) = rabi_populations(theta);
        worst = worst.max((g - g0).abs()).max((d - d0).abs());
    }
    Ok(outcome(
        "population oracle",
        worst < 1e-3,
        format!("{points} pulse areas in [0, 2pi], max error {worst:e}"),
    ))
}

/// Time-domain pathway oracle against the closed-form spectrum.
pub fn closed_form_oracle() -> Result<Outcome> {
    let w = ComplexFrequency::from_thz_ghz(406.7, 1.33);
    let delta = PairSystem::delta_from_parts(6.0 * RAD_PER_GHZ, 2.0 * RAD_PER_GHZ);
    let pair = PairSystem::new(w, w, 1.0, 1.0, delta);
    let grid = TimeGrid {
        n_dq: 512,
        step_dq: 2e-12,
        n_em: 1024,
        step_em: 1.5e-12,
    };
    let crop = Crop {
        center_dq: 813.406,
        half_dq: 0.03,
        center_em: 406.7,
        half_em: 0.04,
    };
    let spec = perturbative_dq2d(&pair, 0.0, &grid, None, [0.0; 4])?;
    let cmp = compare_with_closed_form(&spec, &pair, &crop)?;
    let zero = perturbative_dq2d(&pair.with_delta(Complex64::new(0.0, 0.0)), 0.0, &grid, None, [0.0; 4])?;
    let zero_rel = zero.max_abs() / spec.max_abs();
    Ok(outcome(
        "closed form vs pathway oracle",
        cmp.rms_relative < 0.02 && zero_rel < 1e-10,
        format!(
            "rms {:.4}% over {} points, zero-interaction channel {zero_rel:e}",
            100.0 * cmp.rms_relative,
            cmp.points
        ),
    ))
}

/// `J = mu^2 / (4 pi eps0 eps_r h R^3)` by hand for perpendicular dipoles.
pub fn coupling_anchor() -> Result<Outcome> {
    let mu = debye_to_si(14.3)?;
    let (eps_r, r) = (5.76, 10e-9);
    let z = Vector3::z();
    let perp = dipole_coupling(&(z * mu), &(z * mu), &(Vector3::x() * r), eps_r)?;
    let inline = dipole_coupling(&(z * mu), &(z * mu), &(z * r), eps_r)?;
    let ghz = perp / 1e9;
    let passed = (ghz / 5.36 - 1.0).abs() < 0.01 && inline == -2.0 * perp;
    Ok(outcome(
        "dipole coupling anchor",
        passed,
        format!("perpendicular {ghz:.4} GHz, head-to-tail / perpendicular = {}", inline / perp),
    ))
}

/// Median nearest-neighbour |J| over seeded realizations.
pub fn coupling_scale(realizations: usize, box_nm: f64, seed: u64) -> Result<Outcome> {
    let cfg = EnsembleConfig {
        implanted_density_cm3: 1e18,
        yield_fraction: 0.1,
        box_nm: [box_nm; 3],
        seed,
        ..Default::default()
    };
    let mut all = Vec::new();
    let mut count = 0;
    for k in 0..realizations {
        let ens = sample_ensemble(&realization_config(&cfg, k))?;
        count += ens.emitters.len();
        all.extend(nearest_neighbor_couplings(&ens, 5.76)?);
    }
    let m = median(&mut all) / 1e9;
    Ok(outcome(
        "coupling scale",
        (0.1..=10.0).contains(&m),
        format!(
            "median nearest-neighbour |J| {m:.3} GHz over {realizations} realizations, mean N {:.0}",
            count as f64 / realizations as f64
        ),
    ))
}

/// Two-level splittings from exact diagonalization.
pub fn eigen_anchors() -> Result<Outcome> {
    let w0 = 406.7 * RAD_PER_THZ;
    let mut worst: f64 = 0.0;
    for (detuning_ghz, j_ghz) in [(0.0, 5.36), (0.0, -0.7), (12.0, 5.36), (-30.0, 2.5), (3.0, 0.01)] {
        let d = detuning_ghz * RAD_PER_GHZ;
        let j = j_ghz * RAD_PER_GHZ;
        let m = CouplingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[w0 + d / 2.0, j, j, w0 - d / 2.0]))?;
        let lines = diagonalize_single_excitation(&m, &[1.0, 1.0], WeightRule::Incoherent)?;
        let split = lines.line_centers[1] - lines.line_centers[0];
        let expected = 2.0 * (d * d / 4.0 + j * j).sqrt();
        worst = worst.max((split / expected - 1.0).abs());
    }
    Ok(outcome(
        "eigen splitting anchors",
        worst < 1e-9,
        format!("max relative splitting error {worst:e}"),
    ))
}

/// The invariant suites run by the `selfcheck` subcommand.
pub fn run_all() -> Vec<Outcome> {
    let suites: [(&'static str, fn() -> Result<Outcome>); 6] = [
        ("background-free cancellation", || background_free(1000, 64, 7)),
        ("population oracle", || rabi_oracle(17, 400)),
        ("closed form vs pathway oracle", closed_form_oracle),
        ("dipole coupling anchor", coupling_anchor),
        ("coupling scale", || coupling_scale(100, 215.0, 1)),
        ("eigen splitting anchors", eigen_anchors),
    ];
    suites
        .iter()
        .map(|(name, f)| f().unwrap_or_else(|e| outcome(name, false, format!("error: {e}"))))
        .collect()
}
