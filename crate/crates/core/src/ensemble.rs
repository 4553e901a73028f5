//! Random emitter configurations: Poisson-distributed positions in a box,
//! dipoles along the four cubic <111> directions, and bare transition
//! frequencies drawn from a table of zero-phonon peaks plus a Gaussian
//! pedestal.

use std::f64::consts::LN_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio::{fmt_f64, fmt_scaled, read_scaled, write_file, Metadata, Table};
use crate::units::{debye_to_si, dephasing_rate_from_t2, ComplexFrequency, DEBYE, RAD_PER_GHZ, RAD_PER_THZ};

/// Which spectral feature an emitter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PeakLabel {
    B,
    C,
    #[serde(rename = "Dprime")]
    Dprime,
    Pedestal,
}

impl fmt::Display for PeakLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeakLabel::B => "B",
            PeakLabel::C => "C",
            PeakLabel::Dprime => "Dprime",
            PeakLabel::Pedestal => "Pedestal",
        })
    }
}

impl FromStr for PeakLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(PeakLabel::B),
            "C" => Ok(PeakLabel::C),
            "Dprime" | "D'" => Ok(PeakLabel::Dprime),
            "Pedestal" => Ok(PeakLabel::Pedestal),
            other => Err(Error::invalid(format!("unknown peak label `{other}`"))),
        }
    }
}

/// The four <111> directions of the cubic cell, one per inequivalent axis.
pub const DIPOLE_AXES: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 1.0], [-1.0, 1.0, 1.0]];

pub fn dipole_axis(index: usize) -> Vector3<f64> {
    Vector3::from(DIPOLE_AXES[index]).normalize()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emitter {
    /// m
    pub position: Vector3<f64>,
    /// Index into [`DIPOLE_AXES`].
    pub axis_index: usize,
    pub dipole_axis: Vector3<f64>,
    /// C m
    pub dipole_moment: f64,
    pub bare_frequency: ComplexFrequency,
    pub label: PeakLabel,
}

impl Emitter {
    pub fn dipole_vector(&self) -> Vector3<f64> {
        self.dipole_axis * self.dipole_moment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthProfile {
    #[default]
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub label: PeakLabel,
    pub center_thz: f64,
    pub amplitude: f64,
    /// Dipole moment relative to the strongest transition.
    pub dipole_scale: f64,
}

/// Sampling parameters, in the units used by config and file headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub implanted_density_cm3: f64,
    pub yield_fraction: f64,
    pub box_nm: [f64; 3],
    pub depth_profile: DepthProfile,
    pub dipole_debye: f64,
    pub t2_ps: f64,
    pub min_separation_nm: f64,
    pub peaks: Vec<PeakSpec>,
    pub pedestal_center_thz: f64,
    pub pedestal_fwhm_thz: f64,
    pub pedestal_weight: f64,
    pub pedestal_dipole_scale: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            implanted_density_cm3: 1e18,
            yield_fraction: 0.10,
            box_nm: [200.0, 200.0, 200.0],
            depth_profile: DepthProfile::Uniform,
            dipole_debye: 14.3,
            t2_ps: 120.0,
            min_separation_nm: 1.0,
            peaks: vec![
                PeakSpec {
                    label: PeakLabel::B,
                    center_thz: 406.70,
                    amplitude: 1.0,
                    dipole_scale: 1.0,
                },
                PeakSpec {
                    label: PeakLabel::C,
                    center_thz: 406.48,
                    amplitude: 0.8,
                    dipole_scale: 0.9,
                },
                PeakSpec {
                    label: PeakLabel::Dprime,
                    center_thz: 406.30,
                    amplitude: 0.5,
                    dipole_scale: 0.7,
                },
            ],
            pedestal_center_thz: 406.50,
            pedestal_fwhm_thz: 1.8,
            pedestal_weight: 0.5,
            pedestal_dipole_scale: 0.5,
            seed: 1,
        }
    }
}

/// cm^-3 to m^-3
const PER_CM3: f64 = 1e6;
const NM: f64 = 1e-9;
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

impl EnsembleConfig {
    /// Optically active centers per m^3.
    pub fn effective_density(&self) -> f64 {
        (self.implanted_density_cm3 * self.yield_fraction * PER_CM3).max(0.0)
    }

    pub fn box_m(&self) -> Vector3<f64> {
        Vector3::from(self.box_nm) * NM
    }

    pub fn volume(&self) -> f64 {
        self.box_m().product()
    }

    /// Poisson mean of the emitter count.
    pub fn expected_count(&self) -> f64 {
        self.effective_density() * self.volume()
    }

    pub fn validate(&self) -> Result<()> {
        if self.box_nm.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::invalid(format!("box dimensions must be positive, got {:?} nm", self.box_nm)));
        }
        if !(0.0..=1.0).contains(&self.yield_fraction) {
            return Err(Error::invalid(format!("yield_fraction must lie in [0, 1], got {}", self.yield_fraction)));
        }
        if !self.implanted_density_cm3.is_finite() {
            return Err(Error::invalid("implanted density must be finite"));
        }
        if !(self.pedestal_fwhm_thz > 0.0) {
            return Err(Error::invalid(format!("pedestal_fwhm_thz must be positive, got {}", self.pedestal_fwhm_thz)));
        }
        if !(self.pedestal_weight >= 0.0) || self.peaks.iter().any(|p| !(p.amplitude >= 0.0)) {
            return Err(Error::invalid("peak amplitudes and pedestal weight must be non-negative"));
        }
        if self.peaks.iter().any(|p| !(p.dipole_scale >= 0.0)) || !(self.pedestal_dipole_scale >= 0.0) {
            return Err(Error::invalid("dipole scales must be non-negative"));
        }
        if self.peaks.iter().any(|p| p.label == PeakLabel::Pedestal) {
            return Err(Error::invalid("the pedestal is configured through the pedestal_* keys, not the peak table"));
        }
        let total: f64 = self.peaks.iter().map(|p| p.amplitude).sum::<f64>() + self.pedestal_weight;
        if self.expected_count() > 0.0 && !(total > 0.0) {
            return Err(Error::invalid("at least one peak amplitude or the pedestal weight must be positive"));
        }
        if !(self.min_separation_nm >= 0.0) {
            return Err(Error::invalid("min_separation_nm must be non-negative"));
        }
        debye_to_si(self.dipole_debye)?;
        dephasing_rate_from_t2(self.t2_ps * 1e-12)?;
        Ok(())
    }

    fn header(&self) -> Metadata {
        let peaks: Vec<String> = self
            .peaks
            .iter()
            .map(|p| {
                format!(
                    "{} {} {} {}",
                    p.label,
                    fmt_f64(p.center_thz),
                    fmt_f64(p.amplitude),
                    fmt_f64(p.dipole_scale)
                )
            })
            .collect();
        Metadata::new()
            .with("implanted_density_cm3", fmt_f64(self.implanted_density_cm3))
            .with("yield_fraction", fmt_f64(self.yield_fraction))
            .with(
                "box_nm",
                self.box_nm.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "),
            )
            .with("depth_profile", "uniform")
            .with("dipole_debye", fmt_f64(self.dipole_debye))
            .with("t2_ps", fmt_f64(self.t2_ps))
            .with("min_separation_nm", fmt_f64(self.min_separation_nm))
            .with("peaks", peaks.join("; "))
            .with("pedestal_center_thz", fmt_f64(self.pedestal_center_thz))
            .with("pedestal_fwhm_thz", fmt_f64(self.pedestal_fwhm_thz))
            .with("pedestal_weight", fmt_f64(self.pedestal_weight))
            .with("pedestal_dipole_scale", fmt_f64(self.pedestal_dipole_scale))
            .with("seed", self.seed)
    }

    fn from_header(table: &Table, source: &str) -> Result<Self> {
        let f = |k: &str| table.require_f64(k, source);
        let box_text = table.require("box_nm", source)?;
        let dims: Vec<f64> = box_text
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(source, 1, "box_nm must hold three numbers"))?;
        let box_nm: [f64; 3] = dims
            .try_into()
            .map_err(|_| Error::format(source, 1, "box_nm must hold three numbers"))?;
        let mut peaks = Vec::new();
        for entry in table.require("peaks", source)?.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = entry.split_whitespace().collect();
            let bad = || Error::format(source, 1, format!("bad peak entry `{entry}`"));
            if parts.len() != 4 {
                return Err(bad());
            }
            peaks.push(PeakSpec {
                label: parts[0].parse().map_err(|_| bad())?,
                center_thz: parts[1].parse().map_err(|_| bad())?,
                amplitude: parts[2].parse().map_err(|_| bad())?,
                dipole_scale: parts[3].parse().map_err(|_| bad())?,
            });
        }
        Ok(Self {
            implanted_density_cm3: f("implanted_density_cm3")?,
            yield_fraction: f("yield_fraction")?,
            box_nm,
            depth_profile: DepthProfile::Uniform,
            dipole_debye: f("dipole_debye")?,
            t2_ps: f("t2_ps")?,
            min_separation_nm: f("min_separation_nm")?,
            peaks,
            pedestal_center_thz: f("pedestal_center_thz")?,
            pedestal_fwhm_thz: f("pedestal_fwhm_thz")?,
            pedestal_weight: f("pedestal_weight")?,
            pedestal_dipole_scale: f("pedestal_dipole_scale")?,
            seed: table
                .require("seed", source)?
                .parse()
                .map_err(|_| Error::format(source, 1, "seed must be an unsigned integer"))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub emitters: Vec<Emitter>,
    pub config: EnsembleConfig,
}

/// Draw one configuration. Deterministic for a given `config.seed`.
pub fn sample_ensemble(config: &EnsembleConfig) -> Result<Ensemble> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lambda = config.expected_count();
    let count = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| Error::invalid(format!("poisson mean {lambda}: {e}")))?
            .sample(&mut rng) as usize
    } else {
        0
    };

    let dims = config.box_m();
    let mu = debye_to_si(config.dipole_debye)?;
    let gamma = dephasing_rate_from_t2(config.t2_ps * 1e-12)?;
    let min_sep2 = (config.min_separation_nm * NM).powi(2);

    // Categories: peak table rows, then the pedestal.
    let mut weights: Vec<f64> = config.peaks.iter().map(|p| p.amplitude).collect();
    weights.push(config.pedestal_weight);
    let chooser = if count > 0 {
        Some(WeightedIndex::new(&weights).map_err(|e| Error::invalid(format!("label weights: {e}")))?)
    } else {
        None
    };
    let sigma = config.pedestal_fwhm_thz / (2.0 * (2.0 * LN_2).sqrt());
    let pedestal = Normal::new(config.pedestal_center_thz, sigma)
        .map_err(|e| Error::invalid(format!("pedestal distribution: {e}")))?;

    let mut emitters: Vec<Emitter> = Vec::with_capacity(count);
    for index in 0..count {
        let mut attempts = 0;
        let position = loop {
            attempts += 1;
            let p = Vector3::new(
                rng.random::<f64>() * dims.x,
                rng.random::<f64>() * dims.y,
                rng.random::<f64>() * dims.z,
            );
            if emitters.iter().all(|e| (e.position - p).norm_squared() >= min_sep2) {
                break p;
            }
            if attempts >= MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::PlacementFailed {
                    index,
                    attempts,
                    min_separation: config.min_separation_nm * NM,
                });
            }
        };
        let axis_index = rng.random_range(0..DIPOLE_AXES.len());
        let category = chooser.as_ref().expect("count > 0").sample(&mut rng);
        let (label, f_thz, scale) = match config.peaks.get(category) {
            Some(p) => (p.label, p.center_thz, p.dipole_scale),
            None => (PeakLabel::Pedestal, pedestal.sample(&mut rng), config.pedestal_dipole_scale),
        };
        emitters.push(Emitter {
            position,
            axis_index,
            dipole_axis: dipole_axis(axis_index),
            dipole_moment: mu * scale,
            bare_frequency: ComplexFrequency::new(f_thz * RAD_PER_THZ, gamma),
            label,
        });
    }
    Ok(Ensemble {
        emitters,
        config: config.clone(),
    })
}

/// Nearest neighbour of every point (index, distance). Brute force O(N^2).
pub fn nearest_neighbors(positions: &[Vector3<f64>]) -> Vec<(usize, f64)> {
    positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut best = (usize::MAX, f64::INFINITY);
            for (j, q) in positions.iter().enumerate() {
                if i != j {
                    let d2 = (p - q).norm_squared();
                    if d2 < best.1 {
                        best = (j, d2);
                    }
                }
            }
            (best.0, best.1.sqrt())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn nearest_neighbor_stats(ensemble: &Ensemble) -> Result<NeighborStats> {
    if ensemble.emitters.len() < 2 {
        return Err(Error::invalid(format!(
            "nearest-neighbour statistics need at least 2 emitters, got {}",
            ensemble.emitters.len()
        )));
    }
    let positions: Vec<_> = ensemble.emitters.iter().map(|e| e.position).collect();
    let mut d: Vec<f64> = nearest_neighbors(&positions).into_iter().map(|(_, d)| d).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(NeighborStats {
        mean,
        median: median(&mut d),
        min,
    })
}

const COLUMNS: &str = "x_nm y_nm z_nm axis mu_debye f0_thz gamma_ghz label";

impl Ensemble {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut meta = Metadata::new().with("format", "ensemble");
        meta.extend(&self.config.header());
        meta.set("emitters", self.emitters.len());
        meta.set("columns", COLUMNS);
        meta.write_to(&mut out);
        for e in &self.emitters {
            let row = [
                fmt_scaled(e.position.x, 1.0 / NM),
                fmt_scaled(e.position.y, 1.0 / NM),
                fmt_scaled(e.position.z, 1.0 / NM),
                e.axis_index.to_string(),
                fmt_scaled(e.dipole_moment, 1.0 / DEBYE),
                fmt_scaled(e.bare_frequency.omega, 1.0 / RAD_PER_THZ),
                fmt_scaled(e.bare_frequency.gamma, 1.0 / RAD_PER_GHZ),
                e.label.to_string(),
            ];
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let table = Table::parse(text, source)?;
        if table.metadata.get("format") != Some("ensemble") {
            return Err(Error::format(source, 1, "missing `# format: ensemble` header"));
        }
        let config = EnsembleConfig::from_header(&table, source)?;
        let mut emitters = Vec::new();
        for row in table.blocks.iter().flatten() {
            row.expect_len(8, source)?;
            let axis_index: usize = row.fields[3]
                .parse()
                .ok()
                .filter(|&i| i < DIPOLE_AXES.len())
                .ok_or_else(|| Error::format(source, row.line, "axis index must be 0..3"))?;
            let label: PeakLabel = row.fields[7]
                .parse()
                .map_err(|e: Error| Error::format(source, row.line, e.to_string()))?;
            emitters.push(Emitter {
                position: Vector3::new(
                    read_scaled(row.float(0, source)?, 1.0 / NM),
                    read_scaled(row.float(1, source)?, 1.0 / NM),
                    read_scaled(row.float(2, source)?, 1.0 / NM),
                ),
                axis_index,
                dipole_axis: dipole_axis(axis_index),
                dipole_moment: read_scaled(row.float(4, source)?, 1.0 / DEBYE),
                bare_frequency: ComplexFrequency::new(
                    read_scaled(row.float(5, source)?, 1.0 / RAD_PER_THZ),
                    read_scaled(row.float(6, source)?, 1.0 / RAD_PER_GHZ),
                ),
                label,
            });
        }
        if let Some(n) = table.metadata.get("emitters") {
            if n.parse::<usize>().ok() != Some(emitters.len()) {
                return Err(Error::format(source, 1, format!("header declares {n} emitters, found {}", emitters.len())));
            }
        }
        Ok(Self { emitters, config })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            box_nm: [100.0, 100.0, 100.0],
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn zero_density_is_empty() {
        let cfg = EnsembleConfig {
            implanted_density_cm3: 0.0,
            ..small_config(3)
        };
        assert!(sample_ensemble(&cfg).unwrap().emitters.is_empty());
        let neg = EnsembleConfig {
            implanted_density_cm3: -5.0,
            ..small_config(3)
        };
        assert!(sample_ensemble(&neg).unwrap().emitters.is_empty());
    }

    #[test]
    fn bad_box_rejected() {
        let cfg = EnsembleConfig {
            box_nm: [100.0, 0.0, 100.0],
            ..Default::default()
        };
        assert!(sample_ensemble(&cfg).is_err());
    }

    #[test]
    fn expected_count_for_reference_density() {
        // 1e18 cm^-3 x 10 % yield in (100 nm)^3 = 1e17 x 1e-15 cm^3.
        assert!((small_config(0).expected_count() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn emitters_are_well_formed() {
        let ens = sample_ensemble(&small_config(11)).unwrap();
        let dims = ens.config.box_m();
        assert!(!ens.emitters.is_empty());
        for e in &ens.emitters {
            assert!((e.dipole_axis.norm() - 1.0).abs() < 1e-12);
            assert!(e.dipole_moment >= 0.0);
            for k in 0..3 {
                assert!(e.position[k] >= 0.0 && e.position[k] <= dims[k]);
            }
            if e.label != PeakLabel::Pedestal {
                let p = ens.config.peaks.iter().find(|p| p.label == e.label).unwrap();
                assert_eq!(e.bare_frequency.omega, p.center_thz * RAD_PER_THZ);
            }
        }
        let stats = nearest_neighbor_stats(&ens).unwrap();
        assert!(stats.min >= 1e-9);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_ensemble(&small_config(42)).unwrap();
        let b = sample_ensemble(&small_config(42)).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&small_config(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_and_three_point_neighbor_stats() {
        let mk = |x: f64| Emitter {
            position: Vector3::new(x, 0.0, 0.0),
            axis_index: 0,
            dipole_axis: dipole_axis(0),
            dipole_moment: 1.0,
            bare_frequency: ComplexFrequency::default(),
            label: PeakLabel::B,
        };
        let d = 7e-9;
        let mut ens = Ensemble {
            emitters: vec![mk(0.0), mk(d)],
            config: EnsembleConfig::default(),
        };
        let s = nearest_neighbor_stats(&ens).unwrap();
        assert_eq!((s.mean, s.median, s.min), (d, d, d));
        ens.emitters.push(mk(2.0 * d));
        let s = nearest_neighbor_stats(&ens).unwrap();
        assert!((s.mean - d).abs() < 1e-20);
        ens.emitters.truncate(1);
        assert!(nearest_neighbor_stats(&ens).is_err());
    }

    #[test]
    fn text_round_trip_is_fixpoint() {
        let ens = sample_ensemble(&small_config(5)).unwrap();
        let t1 = ens.to_text();
        let back = Ensemble::from_text(&t1, "mem").unwrap();
        assert_eq!(back.to_text(), t1);
        assert_eq!(Ensemble::from_text(&back.to_text(), "mem").unwrap(), back);
        for (a, b) in back.emitters.iter().zip(&ens.emitters) {
            assert!((a.position - b.position).norm() <= 1e-15 * b.position.norm());
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn malformed_rows_report_line() {
        let ens = sample_ensemble(&small_config(5)).unwrap();
        let mut text = ens.to_text();
        text.push_str("1 2 3 9 14.3 406.7 1.3 B\n");
        match Ensemble::from_text(&text, "f") {
            Err(Error::Format { line, .. }) => assert_eq!(line, text.lines().count()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn isotropic_axes() {
        let cfg = EnsembleConfig {
            box_nm: [500.0, 500.0, 500.0],
            seed: 9,
            ..Default::default()
        };
        let ens = sample_ensemble(&cfg).unwrap();
        assert!(ens.emitters.len() >= 10_000);
        let mut counts = [0usize; 4];
        for e in &ens.emitters {
            counts[e.axis_index] += 1;
        }
        for c in counts {
            let frac = c as f64 / ens.emitters.len() as f64;
            assert!((frac - 0.25).abs() < 0.02, "{counts:?}");
        }
    }
}
