//! Damped least-squares estimation of the pump model from complex slices
//! taken across a pump-field sweep.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dq2d::{extract_slice, PairSystem, SliceAxis};
use crate::error::{Error, Result};
use crate::rabi::{pumped_slice_values, AmplitudeLaw, PumpArgument, PumpModel};
use crate::spectrum::{Axis, ComplexSpectrum1D, Spectrum2D};
use crate::textio::{fmt_f64, fmt_scaled, read_scaled, write_file, Metadata, Table};
use crate::units::{debye_to_si, ComplexFrequency, DEBYE, RAD_PER_GHZ, RAD_PER_THZ};

/// Parameters of the pump-dependence model plus the pair it acts on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitParams {
    /// rad/s
    pub delta_s0: f64,
    pub delta_d0: f64,
    pub delta_s1: f64,
    pub delta_d1: f64,
    pub e_pi: f64,
    pub amplitude: Complex64,
    /// Transition frequencies and moments; its own `delta` is ignored.
    pub pair: PairSystem,
    pub argument: PumpArgument,
}

impl FitParams {
    pub fn model(&self) -> PumpModel {
        PumpModel {
            e_pi: self.e_pi,
            delta_s0: self.delta_s0,
            delta_d0: self.delta_d0,
            delta_s1: self.delta_s1,
            delta_d1: self.delta_d1,
            amplitude: self.amplitude,
            argument: self.argument,
            law: AmplitudeLaw::Rabi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.pair.validate()
    }

    pub fn to_metadata(&self) -> Metadata {
        let ghz = |w: f64| fmt_scaled(w, 1.0 / RAD_PER_GHZ);
        let arg = match self.argument {
            PumpArgument::HalfPi => "half_pi",
            PumpArgument::Literal => "literal",
        };
        Metadata::new()
            .with("delta_s0_ghz", ghz(self.delta_s0))
            .with("delta_d0_ghz", ghz(self.delta_d0))
            .with("delta_s1_ghz", ghz(self.delta_s1))
            .with("delta_d1_ghz", ghz(self.delta_d1))
            .with("e_pi", fmt_f64(self.e_pi))
            .with("amplitude_re", fmt_f64(self.amplitude.re))
            .with("amplitude_im", fmt_f64(self.amplitude.im))
            .with("pump_argument", arg)
            .with("omega_10p_thz", fmt_scaled(self.pair.omega_10p.omega, 1.0 / RAD_PER_THZ))
            .with("gamma_10p_ghz", ghz(self.pair.omega_10p.gamma))
            .with("omega_01p_thz", fmt_scaled(self.pair.omega_01p.omega, 1.0 / RAD_PER_THZ))
            .with("gamma_01p_ghz", ghz(self.pair.omega_01p.gamma))
            .with("mu_10_debye", fmt_scaled(self.pair.mu_10, 1.0 / DEBYE))
            .with("mu_1p0p_debye", fmt_scaled(self.pair.mu_1p0p, 1.0 / DEBYE))
    }

    pub fn from_metadata(meta: &Metadata, source: &str) -> Result<Self> {
        let get = |k: &str| -> Result<f64> {
            let v = meta
                .get(k)
                .ok_or_else(|| Error::format(source, 1, format!("missing parameter `{k}`")))?;
            v.parse()
                .map_err(|_| Error::format(source, 1, format!("parameter `{k}` is not a number: `{v}`")))
        };
        let ghz = |k: &str| get(k).map(|v| read_scaled(v, 1.0 / RAD_PER_GHZ));
        let argument = match meta.get("pump_argument").unwrap_or("half_pi") {
            "half_pi" => PumpArgument::HalfPi,
            "literal" => PumpArgument::Literal,
            other => return Err(Error::format(source, 1, format!("unknown pump_argument `{other}`"))),
        };
        let pair = PairSystem::new(
            ComplexFrequency::new(read_scaled(get("omega_10p_thz")?, 1.0 / RAD_PER_THZ), ghz("gamma_10p_ghz")?),
            ComplexFrequency::new(read_scaled(get("omega_01p_thz")?, 1.0 / RAD_PER_THZ), ghz("gamma_01p_ghz")?),
            read_scaled(get("mu_10_debye")?, 1.0 / DEBYE),
            read_scaled(get("mu_1p0p_debye")?, 1.0 / DEBYE),
            Complex64::new(0.0, 0.0),
        );
        let p = Self {
            delta_s0: ghz("delta_s0_ghz")?,
            delta_d0: ghz("delta_d0_ghz")?,
            delta_s1: ghz("delta_s1_ghz")?,
            delta_d1: ghz("delta_d1_ghz")?,
            e_pi: get("e_pi")?,
            amplitude: Complex64::new(get("amplitude_re")?, get("amplitude_im")?),
            pair,
            argument,
        };
        p.validate().map_err(|e| Error::format(source, 1, e.to_string()))?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        Metadata::new().with("format", "fit_params").write_to(&mut out);
        self.to_metadata().write_to(&mut out);
        out
    }

    /// Reads a parameter file or a fit report.
    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let table = Table::parse(text, source)?;
        Self::from_metadata(&table.metadata, source)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Complex slices along `omega_t` at one `omega_T`, one per pump value.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceDataset {
    pub pump_values: Vec<f64>,
    pub axis: Axis,
    pub slices: Vec<Vec<Complex64>>,
    /// Per-point residual weights, same shape as `slices`.
    pub weights: Option<Vec<Vec<f64>>>,
    /// rad/s
    pub omega_dq: f64,
    /// s
    pub tau: f64,
}

impl SliceDataset {
    pub fn validate(&self) -> Result<()> {
        if self.pump_values.len() < 2 {
            return Err(Error::invalid("a fit needs at least 2 pump values"));
        }
        if self.pump_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("pump values must be strictly increasing"));
        }
        if self.axis.len < 10 {
            return Err(Error::invalid("a fit needs at least 10 points per slice"));
        }
        if self.slices.len() != self.pump_values.len() || self.slices.iter().any(|s| s.len() != self.axis.len) {
            return Err(Error::invalid("every slice must match the shared axis"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.slices.len() || w.iter().any(|r| r.len() != self.axis.len) {
                return Err(Error::invalid("weights must have the same shape as the slices"));
            }
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.slices.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Writes one complex slice file per pump value plus a manifest.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let mut manifest = String::new();
        Metadata::new()
            .with("format", "sweep_manifest")
            .with("omega_T_thz", fmt_scaled(self.omega_dq, 1.0 / RAD_PER_THZ))
            .with("tau_s", fmt_f64(self.tau))
            .write_to(&mut manifest);
        for (k, (e, values)) in self.pump_values.iter().zip(&self.slices).enumerate() {
            let name = format!("{stem}_{k:03}.txt");
            let mut s = ComplexSpectrum1D::new(self.axis, values.clone())?;
            s.metadata.set("pump_field", fmt_f64(*e));
            s.metadata.set("slice_axis", "omega_T");
            s.metadata.set("slice_value_thz", fmt_scaled(self.omega_dq, 1.0 / RAD_PER_THZ));
            s.metadata.set("tau_s", fmt_f64(self.tau));
            s.write(&dir.join(&name))?;
            manifest.push_str(&format!("{} {}\n", fmt_f64(*e), name));
        }
        let path = dir.join(format!("{stem}_manifest.txt"));
        write_file(&path, &manifest)?;
        Ok(path)
    }

    /// Reads a manifest of `pump_field path` rows. Paths are relative to the
    /// manifest. Each file is either a complex 1D slice or a 2D spectrum, in
    /// which case the manifest must carry `# omega_T_thz: value`.
    pub fn read_manifest(path: &Path) -> Result<Self> {
        let source = path.display().to_string();
        let table = Table::read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let header_dq = match table.metadata.get("omega_T_thz") {
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| Error::format(&source, 1, format!("omega_T_thz is not a number: `{v}`")))?,
            ),
            None => None,
        };
        let mut pump_values = Vec::new();
        let mut slices: Vec<ComplexSpectrum1D> = Vec::new();
        let mut tau = table.metadata.get("tau_s").and_then(|v| v.parse::<f64>().ok());
        let mut slice_dq = None;
        for row in table.blocks.iter().flatten() {
            row.expect_len(2, &source)?;
            pump_values.push(row.float(0, &source)?);
            let file = base.join(&row.fields[1]);
            let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let fsrc = file.display().to_string();
            let slice = if text.contains("# format: spectrum2d") {
                let dq = header_dq.ok_or_else(|| {
                    Error::format(&source, row.line, "2D spectra need a `# omega_T_thz:` manifest header")
                })?;
                let s2 = Spectrum2D::from_text(&text, &fsrc)?;
                tau.get_or_insert(s2.tau);
                extract_slice(&s2, SliceAxis::OmegaT, dq)?
            } else {
                ComplexSpectrum1D::from_text(&text, &fsrc)?
            };
            if let Some(v) = slice.metadata.get("slice_value_thz").and_then(|v| v.parse::<f64>().ok()) {
                slice_dq.get_or_insert(v);
            }
            if let Some(v) = slice.metadata.get("tau_s").and_then(|v| v.parse::<f64>().ok()) {
                tau.get_or_insert(v);
            }
            slices.push(slice);
        }
        let dq_thz = header_dq
            .or(slice_dq)
            .ok_or_else(|| Error::format(&source, 1, "omega_T of the slices is unknown"))?;
        let tau = tau.ok_or_else(|| Error::format(&source, 1, "tau of the slices is unknown"))?;
        let axis = slices
            .first()
            .map(|s| s.axis)
            .ok_or_else(|| Error::format(&source, 1, "manifest lists no slices"))?;
        if slices.iter().any(|s| s.axis != axis) {
            return Err(Error::format(&source, 1, "slices do not share one axis"));
        }
        let ds = Self {
            pump_values,
            axis,
            slices: slices.into_iter().map(|s| s.amplitude).collect(),
            weights: None,
            omega_dq: read_scaled(dq_thz, 1.0 / RAD_PER_THZ),
            tau,
        };
        ds.validate().map_err(|e| Error::format(&source, 1, e.to_string()))?;
        Ok(ds)
    }
}

/// Model slices for `params` on the dataset's sampling.
pub fn model_slices(params: &FitParams, pump_values: &[f64], axis: Axis, omega_dq: f64, tau: f64) -> Result<Vec<Vec<Complex64>>> {
    let em = axis.angular();
    let model = params.model();
    pump_values
        .iter()
        .map(|e| pumped_slice_values(*e, &model, &params.pair, &em, omega_dq, tau))
        .collect()
}

/// Model evaluated per pump value with complex Gaussian noise of variance
/// `(noise * max|signal|)^2` per point (split equally between real and
/// imaginary parts).
pub fn generate_synthetic(
    params: &FitParams,
    pump_values: &[f64],
    axis: Axis,
    omega_dq: f64,
    tau: f64,
    noise: f64,
    seed: u64,
) -> Result<SliceDataset> {
    params.validate()?;
    if !(noise >= 0.0) {
        return Err(Error::invalid("noise level must be non-negative"));
    }
    let mut slices = model_slices(params, pump_values, axis, omega_dq, tau)?;
    if noise > 0.0 {
        let peak = slices.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
        let normal = Normal::new(0.0, noise * peak / std::f64::consts::SQRT_2)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in slices.iter_mut().flatten() {
            *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(SliceDataset {
        pump_values: pump_values.to_vec(),
        axis,
        slices,
        weights: None,
        omega_dq,
        tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tol: f64,
    /// Stop when the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Also fit both transition frequencies and dephasing rates.
    pub fit_pair: bool,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            cost_tol: 1e-10,
            grad_tol: 1e-12,
            fit_pair: false,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    CostChange,
    Gradient,
    /// No damping level lowers the cost further.
    Stalled,
    MaxIterations,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::CostChange => "cost_change",
            Self::Gradient => "gradient",
            Self::Stalled => "stalled",
            Self::MaxIterations => "max_iterations",
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: FitParams,
    /// `(name, one-sigma)` in the units of the report keys.
    pub uncertainties: Vec<(String, f64)>,
    /// Sum of `|model - data|^2` over all points.
    pub residual_sum: f64,
    /// `residual_sum / sum |data|^2`.
    pub relative_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Internal cost after every accepted step, starting with the initial one.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn to_text(&self) -> String {
        let mut meta = Metadata::new().with("format", "fit_report");
        meta.extend(&self.params.to_metadata());
        for (name, sigma) in &self.uncertainties {
            meta.set(format!("sigma_{name}"), fmt_f64(*sigma));
        }
        meta.set(
            "uncertainty_basis",
            "curvature (J^T J)^-1 scaled by residual variance; no published reference values",
        );
        meta.set("residual_sum", fmt_f64(self.residual_sum));
        meta.set("relative_residual", fmt_f64(self.relative_residual));
        meta.set("iterations", self.iterations);
        meta.set("converged", self.converged);
        meta.set("termination", self.termination);
        let mut out = String::new();
        meta.write_to(&mut out);
        out
    }
}

/// Internal parametrization: frequencies in GHz, amplitude relative to its
/// initial magnitude.
struct Problem<'a> {
    data: &'a SliceDataset,
    base: FitParams,
    amp_scale: f64,
    data_scale: f64,
    em: Vec<f64>,
    fit_pair: bool,
}

const NAMES: [&str; 11] = [
    "delta_s0_ghz",
    "delta_d0_ghz",
    "delta_s1_ghz",
    "delta_d1_ghz",
    "e_pi",
    "amplitude_re",
    "amplitude_im",
    "omega_10p_ghz_offset",
    "gamma_10p_ghz",
    "omega_01p_ghz_offset",
    "gamma_01p_ghz",
];

impl<'a> Problem<'a> {
    fn n_params(&self) -> usize {
        if self.fit_pair {
            11
        } else {
            7
        }
    }

    fn pack(&self, p: &FitParams) -> DVector<f64> {
        let mut v = vec![
            p.delta_s0 / RAD_PER_GHZ,
            p.delta_d0 / RAD_PER_GHZ,
            p.delta_s1 / RAD_PER_GHZ,
            p.delta_d1 / RAD_PER_GHZ,
            p.e_pi,
            p.amplitude.re / self.amp_scale,
            p.amplitude.im / self.amp_scale,
        ];
        if self.fit_pair {
            v.extend([
                (p.pair.omega_10p.omega - self.base.pair.omega_10p.omega) / RAD_PER_GHZ,
                p.pair.omega_10p.gamma / RAD_PER_GHZ,
                (p.pair.omega_01p.omega - self.base.pair.omega_01p.omega) / RAD_PER_GHZ,
                p.pair.omega_01p.gamma / RAD_PER_GHZ,
            ]);
        }
        DVector::from_vec(v)
    }

    fn unpack(&self, v: &DVector<f64>) -> FitParams {
        let mut p = self.base;
        p.delta_s0 = v[0] * RAD_PER_GHZ;
        p.delta_d0 = v[1] * RAD_PER_GHZ;
        p.delta_s1 = v[2] * RAD_PER_GHZ;
        p.delta_d1 = v[3] * RAD_PER_GHZ;
        p.e_pi = v[4];
        p.amplitude = Complex64::new(v[5], v[6]) * self.amp_scale;
        if self.fit_pair {
            p.pair.omega_10p = ComplexFrequency::new(self.base.pair.omega_10p.omega + v[7] * RAD_PER_GHZ, v[8] * RAD_PER_GHZ);
            p.pair.omega_01p = ComplexFrequency::new(self.base.pair.omega_01p.omega + v[9] * RAD_PER_GHZ, v[10] * RAD_PER_GHZ);
        }
        p
    }

    fn admissible(&self, v: &DVector<f64>) -> bool {
        v.iter().all(|x| x.is_finite()) && v[4] > 0.0 && (!self.fit_pair || (v[8] >= 0.0 && v[10] >= 0.0))
    }

    /// Stacked real and imaginary residuals divided by the data scale.
    fn residuals(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.unpack(v);
        let model = p.model();
        let n = self.em.len();
        let mut r = DVector::zeros(2 * n * self.data.pump_values.len());
        for (k, e) in self.data.pump_values.iter().enumerate() {
            let m = pumped_slice_values(*e, &model, &p.pair, &self.em, self.data.omega_dq, self.data.tau)?;
            for (j, (mv, dv)) in m.iter().zip(&self.data.slices[k]).enumerate() {
                let w = self.data.weights.as_ref().map_or(1.0, |w| w[k][j]);
                let d = (mv - dv) * (w / self.data_scale);
                r[2 * (k * n + j)] = d.re;
                r[2 * (k * n + j) + 1] = d.im;
            }
        }
        Ok(r)
    }

    fn step_size(x: f64) -> f64 {
        6e-6 * x.abs().max(1.0)
    }

    /// Central differences, column by column.
    fn jacobian(&self, v: &DVector<f64>, scale: f64) -> Result<DMatrix<f64>> {
        let n = v.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let h = scale * Self::step_size(v[j]);
            let (mut up, mut down) = (v.clone(), v.clone());
            up[j] += h;
            down[j] -= h;
            let (ru, rd) = (self.residuals(&up)?, self.residuals(&down)?);
            cols.push((ru - rd) / (2.0 * h));
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

fn half_norm_sq(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Levenberg-Marquardt on stacked real/imaginary residuals with a
/// numerically differentiated Jacobian. Non-convergence within `max_iter`
/// returns the best parameters found with `converged = false`.
pub fn fit_slices(data: &SliceDataset, initial: &FitParams, options: &FitOptions) -> Result<FitResult> {
    data.validate()?;
    initial.validate()?;
    let data_scale = data.max_abs();
    if !(data_scale > 0.0) {
        return Err(Error::invalid("dataset is identically zero"));
    }
    let amp_scale = initial.amplitude.norm();
    if !(amp_scale > 0.0) {
        return Err(Error::invalid("initial amplitude must be nonzero"));
    }
    let problem = Problem {
        data,
        base: *initial,
        amp_scale,
        data_scale,
        em: data.axis.angular(),
        fit_pair: options.fit_pair,
    };
    let n = problem.n_params();
    let mut v = problem.pack(initial);
    let mut r = problem.residuals(&v)?;
    let mut cost = half_norm_sq(&r);
    let mut history = vec![cost];
    let mut lambda = options.initial_damping;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut jac = problem.jacobian(&v, 1.0)?;

    while iterations < options.max_iter {
        let grad = jac.transpose() * &r;
        if grad.amax() < options.grad_tol || cost == 0.0 {
            termination = Termination::Gradient;
            break;
        }
        let jtj = jac.transpose() * &jac;
        if let Some(j) = (0..n).find(|&j| jtj[(j, j)] == 0.0) {
            return Err(Error::SingularJacobian(NAMES[j].to_string()));
        }
        iterations += 1;
        let mut accepted = None;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)];
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let trial = &v - chol.solve(&grad);
            if !problem.admissible(&trial) {
                lambda *= 4.0;
                continue;
            }
            let rt = problem.residuals(&trial)?;
            let ct = half_norm_sq(&rt);
            if ct < cost {
                lambda = (lambda / 3.0).max(1e-12);
                accepted = Some((trial, rt, ct));
                break;
            }
            lambda *= 4.0;
        }
        let Some((trial, rt, ct)) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        let rel = (cost - ct) / cost;
        v = trial;
        r = rt;
        cost = ct;
        history.push(cost);
        jac = problem.jacobian(&v, 1.0)?;
        if rel < options.cost_tol {
            termination = Termination::CostChange;
            break;
        }
    }

    let params = problem.unpack(&v);
    let dof = r.len().saturating_sub(n).max(1) as f64;
    let s2 = 2.0 * cost / dof;
    let jtj = jac.transpose() * &jac;
    let uncertainties = match jtj.try_inverse() {
        Some(cov) => (0..n)
            .map(|j| {
                let mut sigma = (s2 * cov[(j, j)].max(0.0)).sqrt();
                if j == 5 || j == 6 {
                    sigma *= amp_scale;
                }
                (NAMES[j].to_string(), sigma)
            })
            .collect(),
        None => Vec::new(),
    };
    let residual_sum = 2.0 * cost * data_scale * data_scale;
    let data_norm: f64 = data.slices.iter().flatten().map(|d| d.norm_sqr()).sum();
    Ok(FitResult {
        params,
        uncertainties,
        residual_sum,
        relative_residual: residual_sum / data_norm,
        iterations,
        converged: termination != Termination::MaxIterations,
        termination,
        cost_history: history,
    })
}

/// Reference test problem: a resonant pair near 406.7 THz with the
/// homogeneous width of a 120 ps dephasing time.
pub fn reference_params() -> FitParams {
    let w = ComplexFrequency::new(406.7 * RAD_PER_THZ, 1.0 / 120e-12);
    let mu = debye_to_si(14.3).unwrap_or(0.0);
    FitParams {
        delta_s0: 6.0 * RAD_PER_GHZ,
        delta_d0: 2.0 * RAD_PER_GHZ,
        delta_s1: -200.0 * RAD_PER_GHZ,
        delta_d1: 50.0 * RAD_PER_GHZ,
        e_pi: 1.0,
        amplitude: Complex64::new(1.0, 0.0),
        pair: PairSystem::new(w, w, mu, mu, Complex64::new(0.0, 0.0)),
        argument: PumpArgument::HalfPi,
    }
}
