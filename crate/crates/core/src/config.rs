//! Run configuration: one TOML document with a section per stage.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::WeightRule;
use crate::dq2d::{IntegrationMode, PairSystem, PeakBox};
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::linear::LinearOptions;
use crate::oracle::{Crop, TimeGrid};
use crate::rabi::{fresnel_field_transmission, AmplitudeLaw, PulseParams, PumpArgument, PumpModel};
use crate::spectrum::Axis;
use crate::units::{debye_to_si, ComplexFrequency, RAD_PER_GHZ, RAD_PER_THZ};

/// Environment variable that may replace `output.dir`.
pub const OUT_DIR_ENV: &str = "DIPOLAR_OUT";

/// Name of the resolved configuration written next to every run's outputs.
pub const RESOLVED_NAME: &str = "resolved_config.toml";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub ensemble: EnsembleConfig,
    pub material: MaterialSection,
    pub linear: LinearSection,
    pub dq2d: Dq2dSection,
    pub pump: PumpSection,
    pub pulse: PulseSection,
    pub fit: FitSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialSection {
    pub refractive_index: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self { refractive_index: 2.4 }
    }
}

impl MaterialSection {
    pub fn eps_r(&self) -> f64 {
        self.refractive_index * self.refractive_index
    }
}

/// Uniform frequency grid in THz, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start_thz: f64,
    pub stop_thz: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn axis(&self, name: &str) -> Result<Axis> {
        Axis::linspace(self.start_thz, self.stop_thz, self.points).map_err(|e| Error::Config(format!("{name}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSection {
    pub realizations: usize,
    pub interactions: bool,
    pub dark_pedestal: bool,
    pub weight_rule: WeightRule,
    pub grid: GridSpec,
    /// Measured spectrum to overlay, relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measured: Option<PathBuf>,
}

impl Default for LinearSection {
    fn default() -> Self {
        Self {
            realizations: 100,
            interactions: true,
            dark_pedestal: false,
            weight_rule: WeightRule::default(),
            grid: GridSpec {
                start_thz: 405.5,
                stop_thz: 407.5,
                points: 2001,
            },
            measured: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dq2dMode {
    #[default]
    SinglePair,
    Ensemble,
}

/// One emitter pair in config units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairSection {
    pub f10_thz: f64,
    pub gamma10_ghz: f64,
    pub f01_thz: f64,
    pub gamma01_ghz: f64,
    pub mu10_debye: f64,
    pub mu01_debye: f64,
    /// Interaction shift and dephasing, ordinary GHz.
    pub delta_s_ghz: f64,
    pub delta_d_ghz: f64,
    pub doubly_excited_scale: f64,
}

impl Default for PairSection {
    fn default() -> Self {
        Self {
            f10_thz: 406.7,
            gamma10_ghz: 1.33,
            f01_thz: 406.7,
            gamma01_ghz: 1.33,
            mu10_debye: 14.3,
            mu01_debye: 14.3,
            delta_s_ghz: 6.0,
            delta_d_ghz: 2.0,
            doubly_excited_scale: 1.0,
        }
    }
}

impl PairSection {
    pub fn pair(&self) -> Result<PairSystem> {
        let mut p = PairSystem::new(
            ComplexFrequency::from_thz_ghz(self.f10_thz, self.gamma10_ghz),
            ComplexFrequency::from_thz_ghz(self.f01_thz, self.gamma01_ghz),
            debye_to_si(self.mu10_debye)?,
            debye_to_si(self.mu01_debye)?,
            PairSystem::delta_from_parts(self.delta_s_ghz * RAD_PER_GHZ, self.delta_d_ghz * RAD_PER_GHZ),
        );
        p.doubly_excited_scale = self.doubly_excited_scale;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Dq2dSection {
    pub mode: Dq2dMode,
    /// Delay between the first two pulses. No default: must be set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_ps: Option<f64>,
    pub pair: PairSection,
    /// Interaction dephasing for every ensemble pair, ordinary GHz.
    pub ensemble_delta_d_ghz: f64,
    pub dq_grid: GridSpec,
    pub emission_grid: GridSpec,
    pub with_magnitude: bool,
    pub boxes: Vec<PeakBox>,
}

impl Default for Dq2dSection {
    fn default() -> Self {
        let h = 0.03;
        Self {
            mode: Dq2dMode::SinglePair,
            tau_ps: None,
            pair: PairSection::default(),
            ensemble_delta_d_ghz: 2.0,
            dq_grid: GridSpec {
                start_thz: 812.4,
                stop_thz: 813.6,
                points: 601,
            },
            emission_grid: GridSpec {
                start_thz: 406.2,
                stop_thz: 406.8,
                points: 601,
            },
            with_magnitude: false,
            boxes: vec![
                PeakBox::around("B", 813.4, 406.7, h),
                PeakBox::around("C", 812.96, 406.48, h),
                PeakBox::around("Dprime", 812.6, 406.3, h),
                PeakBox::around("BC_upper", 813.18, 406.7, h),
                PeakBox::around("BC_lower", 813.18, 406.48, h),
            ],
        }
    }
}

impl Dq2dSection {
    pub fn tau(&self) -> Result<f64> {
        match self.tau_ps {
            Some(t) if t >= 0.0 && t.is_finite() => Ok(t * 1e-12),
            Some(t) => Err(Error::Config(format!("dq2d.tau_ps must be a non-negative number, got {t}"))),
            None => Err(Error::Config("dq2d.tau_ps is required".into())),
        }
    }
}

/// Sweep values: either an explicit list or `points` evenly spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PumpSection {
    pub e_pi: f64,
    pub delta_s0_ghz: f64,
    pub delta_d0_ghz: f64,
    pub delta_s1_ghz: f64,
    pub delta_d1_ghz: f64,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub argument: PumpArgument,
    pub amplitude_law: AmplitudeLaw,
    pub field_start: f64,
    pub field_stop: f64,
    pub field_points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_values: Option<Vec<f64>>,
    /// Slice position; defaults to `f10 + f01 + delta_s0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice_omega_t_thz: Option<f64>,
    pub integration: IntegrationMode,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self {
            e_pi: 1.0,
            delta_s0_ghz: 6.0,
            delta_d0_ghz: 2.0,
            delta_s1_ghz: -200.0,
            delta_d1_ghz: 50.0,
            amplitude_re: 1.0,
            amplitude_im: 0.0,
            argument: PumpArgument::HalfPi,
            amplitude_law: AmplitudeLaw::Rabi,
            field_start: 0.0,
            field_stop: 2.0,
            field_points: 41,
            field_values: None,
            slice_omega_t_thz: None,
            integration: IntegrationMode::Magnitude,
        }
    }
}

impl PumpSection {
    pub fn model(&self) -> Result<PumpModel> {
        let m = PumpModel {
            e_pi: self.e_pi,
            delta_s0: self.delta_s0_ghz * RAD_PER_GHZ,
            delta_d0: self.delta_d0_ghz * RAD_PER_GHZ,
            delta_s1: self.delta_s1_ghz * RAD_PER_GHZ,
            delta_d1: self.delta_d1_ghz * RAD_PER_GHZ,
            amplitude: Complex64::new(self.amplitude_re, self.amplitude_im),
            argument: self.argument,
            law: self.amplitude_law,
        };
        m.validate().map_err(|e| Error::Config(format!("pump: {e}")))?;
        Ok(m)
    }

    pub fn fields(&self) -> Result<Vec<f64>> {
        let v = match &self.field_values {
            Some(v) => v.clone(),
            None if self.field_points == 1 => vec![self.field_start],
            None => Axis::linspace(self.field_start, self.field_stop, self.field_points)
                .map_err(|e| Error::Config(format!("pump field sweep: {e}")))?
                .values()
                .collect(),
        };
        if v.is_empty() || v.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::Config("pump fields must be a non-empty list of non-negative numbers".into()));
        }
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("pump fields must be strictly increasing".into()));
        }
        Ok(v)
    }

    /// rad/s
    pub fn slice_omega_dq(&self, pair: &PairSystem) -> f64 {
        match self.slice_omega_t_thz {
            Some(f) => f * RAD_PER_THZ,
            None => pair.omega_10p.omega + pair.omega_01p.omega + self.delta_s0_ghz * RAD_PER_GHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PulseSection {
    pub rep_rate_mhz: f64,
    pub fwhm_fs: f64,
    pub dipole_debye: f64,
    /// 1/e^2 diameter. When absent, it is solved for from `pi_power_mw`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot_diameter_um: Option<f64>,
    pub pi_power_mw: f64,
    /// Defaults to the normal-incidence Fresnel field transmission.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field_correction: Option<f64>,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            rep_rate_mhz: 75.5,
            fwhm_fs: 200.0,
            dipole_debye: 14.3,
            spot_diameter_um: None,
            pi_power_mw: 11.4,
            field_correction: None,
        }
    }
}

impl PulseSection {
    /// Pulse parameters; the spot diameter may be a placeholder when unset.
    pub fn params(&self, material: &MaterialSection) -> Result<PulseParams> {
        let p = PulseParams {
            rep_rate_hz: self.rep_rate_mhz * 1e6,
            fwhm_duration_s: self.fwhm_fs * 1e-15,
            dipole_moment: debye_to_si(self.dipole_debye)?,
            spot_diameter_m: self.spot_diameter_um.unwrap_or(1.0) * 1e-6,
            field_correction: self
                .field_correction
                .unwrap_or_else(|| fresnel_field_transmission(material.refractive_index)),
        };
        p.validate().map_err(|e| Error::Config(format!("pulse: {e}")))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSection {
    /// Sweep manifest to fit. Without one, a synthetic sweep is generated
    /// from `[pump]` and `[dq2d.pair]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Starting parameters (a parameter file or an earlier report).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<PathBuf>,
    /// Relative noise of the synthetic sweep.
    pub noise: f64,
    pub seed: u64,
    /// Without `initial`, each model parameter starts at truth times
    /// `1 + u`, `u` uniform in `[-perturbation, perturbation]`.
    pub perturbation: f64,
    pub synthetic_grid: GridSpec,
    pub options: FitOptions,
}

impl Default for FitSection {
    fn default() -> Self {
        Self {
            manifest: None,
            initial: None,
            noise: 0.01,
            seed: 1,
            perturbation: 0.3,
            synthetic_grid: GridSpec {
                start_thz: 406.4,
                stop_thz: 407.0,
                points: 601,
            },
            options: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSection {
    pub n_dq: usize,
    pub step_dq_ps: f64,
    pub n_em: usize,
    pub step_em_ps: f64,
    /// Comparison window half-widths around the expected peak, THz.
    pub crop_half_dq_thz: f64,
    pub crop_half_em_thz: f64,
    /// Pulse areas in `[0, 2 pi]` for the population check.
    pub rabi_points: usize,
    pub rabi_steps_per_pulse: usize,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            n_dq: 512,
            step_dq_ps: 2.0,
            n_em: 1024,
            step_em_ps: 1.5,
            crop_half_dq_thz: 0.03,
            crop_half_em_thz: 0.04,
            rabi_points: 17,
            rabi_steps_per_pulse: 400,
        }
    }
}

impl OracleSection {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            n_dq: self.n_dq,
            step_dq: self.step_dq_ps * 1e-12,
            n_em: self.n_em,
            step_em: self.step_em_ps * 1e-12,
        }
    }

    pub fn crop(&self, pair: &PairSystem) -> Crop {
        Crop {
            center_dq: (pair.omega_11p().re + pair.delta_shift()) / RAD_PER_THZ,
            half_dq: self.crop_half_dq_thz,
            center_em: 0.5 * (pair.omega_10p.omega + pair.omega_01p.omega) / RAD_PER_THZ,
            half_em: self.crop_half_em_thz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn linear_options(&self) -> LinearOptions {
        LinearOptions {
            eps_r: self.material.eps_r(),
            interactions: self.linear.interactions,
            dark_pedestal: self.linear.dark_pedestal,
            weight_rule: self.linear.weight_rule,
        }
    }

    /// Parses a document. Unknown keys are errors in strict mode and are
    /// returned as warnings otherwise.
    pub fn parse(text: &str, source: &str, strict: bool) -> Result<(Self, Vec<String>)> {
        let de = toml::Deserializer::parse(text).map_err(|e| toml_error(text, source, &e))?;
        let mut unknown = Vec::new();
        let cfg: Self = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| toml_error(text, source, &e))?;
        let mut warnings = Vec::new();
        for key in unknown {
            let line = key_line(text, &key);
            if strict {
                return Err(Error::format(source, line, format!("unknown key `{key}`")));
            }
            warnings.push(format!("{source}:{line}: ignoring unknown key `{key}`"));
        }
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{source}: {m}")),
            other => Error::Config(format!("{source}: {other}")),
        })?;
        Ok((cfg, warnings))
    }

    pub fn load(path: &Path, strict: bool) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (mut cfg, warnings) = Self::parse(&text, &path.display().to_string(), strict)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok((cfg, warnings))
    }

    /// Makes input paths absolute relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.linear.measured, &mut self.fit.manifest, &mut self.fit.initial]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate().map_err(|e| Error::Config(format!("ensemble: {e}")))?;
        if !(self.material.refractive_index >= 1.0) {
            return Err(Error::Config(format!(
                "material.refractive_index must be >= 1, got {}",
                self.material.refractive_index
            )));
        }
        if self.linear.realizations == 0 {
            return Err(Error::Config("linear.realizations must be at least 1".into()));
        }
        self.linear.grid.axis("linear.grid")?;
        self.dq2d.dq_grid.axis("dq2d.dq_grid")?;
        self.dq2d.emission_grid.axis("dq2d.emission_grid")?;
        if let Some(t) = self.dq2d.tau_ps {
            if !(t >= 0.0) || !t.is_finite() {
                return Err(Error::Config(format!("dq2d.tau_ps must be a non-negative number, got {t}")));
            }
        }
        self.dq2d.pair.pair().map_err(|e| Error::Config(format!("dq2d.pair: {e}")))?;
        for (i, b) in self.dq2d.boxes.iter().enumerate() {
            if b.label.is_empty() || b.label.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("dq2d.boxes[{i}]: label `{}` must be non-empty without whitespace", b.label)));
            }
            if self.dq2d.boxes[..i].iter().any(|o| o.label == b.label) {
                return Err(Error::Config(format!("dq2d.boxes: duplicate label `{}`", b.label)));
            }
            if !(b.dq_range.0 < b.dq_range.1) || !(b.emission_range.0 < b.emission_range.1) {
                return Err(Error::Config(format!("dq2d.boxes[{i}]: ranges must be increasing")));
            }
        }
        self.pump.model()?;
        self.pump.fields()?;
        if !(self.fit.noise >= 0.0) || !(0.0..1.0).contains(&self.fit.perturbation) {
            return Err(Error::Config("fit.noise must be >= 0 and fit.perturbation in [0, 1)".into()));
        }
        if self.oracle.rabi_points < 2 || self.oracle.rabi_steps_per_pulse == 0 {
            return Err(Error::Config("oracle.rabi_points must be >= 2 and rabi_steps_per_pulse >= 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Pulse parameters with the spot diameter resolved.
    pub fn pulse_params(&self) -> Result<PulseParams> {
        let mut p = self.pulse.params(&self.material)?;
        if self.pulse.spot_diameter_um.is_none() {
            p.spot_diameter_m = crate::rabi::spot_for_pi(self.pulse.pi_power_mw * 1e-3, &p)?;
        }
        Ok(p)
    }

    /// Ensemble-pair interaction dephasing, rad/s.
    pub fn ensemble_delta_d(&self) -> f64 {
        self.dq2d.ensemble_delta_d_ghz * RAD_PER_GHZ
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn toml_error(text: &str, source: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map_or(1, |s| line_of(text, s.start));
    Error::format(source, line, e.message().trim())
}

/// Best-effort line of a dotted key path such as `ensemble.bogus`.
fn key_line(text: &str, path: &str) -> usize {
    let last = path.rsplit('.').next().unwrap_or(path);
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(last)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
                || l.trim_start_matches('[').trim_end_matches(']').ends_with(last) && l.starts_with('[')
        })
        .map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.dq2d.tau_ps = Some(0.5);
        cfg.linear.measured = Some(PathBuf::from("/data/pl.txt"));
        let text = cfg.to_toml().unwrap();
        let (back, warnings) = RunConfig::parse(&text, "t", true).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn empty_document_is_default() {
        let (cfg, _) = RunConfig::parse("", "t", true).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_warn_or_fail() {
        let text = "[ensemble]\nyield_fraction = 0.2\nbogus = 3\n";
        let (cfg, warnings) = RunConfig::parse(text, "c.toml", false).unwrap();
        assert_eq!(cfg.ensemble.yield_fraction, 0.2);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("c.toml:3") && warnings[0].contains("ensemble.bogus"));
        match RunConfig::parse(text, "c.toml", true) {
            Err(Error::Format { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("ensemble.bogus"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_and_type_errors_carry_lines() {
        for (text, want) in [
            ("[ensemble]\nseed = 1\nt2_ps = \"long\"\n", 3),
            ("[dq2d]\n\ntau_ps = = 1\n", 3),
            ("[pump]\nargument = \"sideways\"\n", 2),
        ] {
            match RunConfig::parse(text, "c.toml", true) {
                Err(Error::Format { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn tau_is_required() {
        assert!(RunConfig::default().dq2d.tau().is_err());
        let (cfg, _) = RunConfig::parse("[dq2d]\ntau_ps = 0.0\n", "t", true).unwrap();
        assert_eq!(cfg.dq2d.tau().unwrap(), 0.0);
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        let e = RunConfig::parse("[pump]\ne_pi = -1.0\n", "t", true).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::parse("[pump]\nfield_values = [0.0, 0.0]\n", "t", true).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let b = "[[dq2d.boxes]]\nlabel = \"{}\"\ndq_range = [813.3, 813.4]\nemission_range = [406.6, 406.7]\n";
        for label in ["two words", ""] {
            let e = RunConfig::parse(&b.replace("{}", label), "t", true).unwrap_err();
            assert!(e.to_string().contains("label"), "{e}");
        }
        let e = RunConfig::parse(&format!("{}{}", b.replace("{}", "A"), b.replace("{}", "A")), "t", true).unwrap_err();
        assert!(e.to_string().contains("duplicate"), "{e}");
    }

    #[test]
    fn saturation_law_parses() {
        let text = "[pump]\namplitude_law = { law = \"saturation\", strength = 0.8, e_sat = 0.5 }\n";
        let (cfg, _) = RunConfig::parse(text, "t", true).unwrap();
        assert_eq!(
            cfg.pump.amplitude_law,
            AmplitudeLaw::Saturation {
                strength: 0.8,
                e_sat: 0.5
            }
        );
        let (back, _) = RunConfig::parse(&cfg.to_toml().unwrap(), "t", true).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_spot_is_focused() {
        let p = RunConfig::default().pulse_params().unwrap();
        assert!(p.spot_diameter_m > 0.5e-6 && p.spot_diameter_m < 50e-6);
    }
}
