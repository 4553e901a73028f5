//! Subcommand pipelines. Each writes its outputs plus the resolved
//! configuration into one directory.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Dq2dMode, RunConfig, RESOLVED_NAME};
use crate::dq2d::{extract_slice, grid_response, integrate_peak, pairs_from_ensemble, IntegrationMode, PeakBox, SliceAxis};
use crate::ensemble::sample_ensemble;
use crate::error::{Error, Result};
use crate::fit::{fit_slices, generate_synthetic, FitParams, SliceDataset};
use crate::linear::{ensemble_average_spectrum, fwhm_of_peak, overlay};
use crate::oracle::{compare_with_closed_form, perturbative_dq2d, rabi_populations_oracle};
use crate::rabi::{pi_power, power_from_field, pump_delta, rabi_populations};
use crate::spectrum::{Axis, Spectrum1D};
use crate::textio::{fmt_f64, read_scaled, write_file, DataTable, Metadata};
use crate::units::{lorentzian_fwhm_from_t2, RAD_PER_THZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ensemble,
    Linear,
    Dq2d,
    PumpSweep,
    Fit,
    Oracle,
    Selfcheck,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Human-readable remarks for stderr.
    pub notes: Vec<String>,
    /// False when a fit stopped at its iteration limit or a check failed.
    pub converged: bool,
    pub failed_checks: usize,
}

impl RunSummary {
    fn new() -> Self {
        Self {
            converged: true,
            ..Default::default()
        }
    }

    fn wrote(&mut self, path: PathBuf) {
        self.files.push(path);
    }
}

/// Runs `command` and writes everything into `out`.
pub fn execute(command: Command, config: &RunConfig, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut summary = RunSummary::new();
    let mut resolved = config.clone();
    resolved.output.dir = PathBuf::from(".");
    let path = out.join(RESOLVED_NAME);
    write_file(&path, &resolved.to_toml()?)?;
    summary.wrote(path);
    match command {
        Command::Ensemble => cmd_ensemble(config, out, &mut summary)?,
        Command::Linear => cmd_linear(config, out, &mut summary)?,
        Command::Dq2d => cmd_dq2d(config, out, &mut summary)?,
        Command::PumpSweep => cmd_pump_sweep(config, out, &mut summary)?,
        Command::Fit => cmd_fit(config, out, &mut summary)?,
        Command::Oracle => cmd_oracle(config, out, &mut summary)?,
        Command::Selfcheck => cmd_selfcheck(out, &mut summary)?,
    }
    Ok(summary)
}

fn cmd_ensemble(config: &RunConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let ens = sample_ensemble(&config.ensemble)?;
    let path = out.join("ensemble.txt");
    ens.write(&path)?;
    summary.notes.push(format!("{} emitters", ens.emitters.len()));
    summary.wrote(path);
    Ok(())
}

fn cmd_linear(config: &RunConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let grid = config.linear.grid.axis("linear.grid")?;
    let opts = config.linear_options();
    let mut spec = ensemble_average_spectrum(&config.ensemble, config.linear.realizations, &opts, grid)?;
    let homogeneous = lorentzian_fwhm_from_t2(config.ensemble.t2_ps * 1e-12)?;
    spec.metadata.set("homogeneous_fwhm_ghz", fmt_f64(homogeneous / 1e9));
    if let Some(w) = fwhm_of_peak(&spec) {
        spec.metadata.set("composite_fwhm_ghz", fmt_f64(w * 1e3));
    }
    if let Some(w) = spec.metadata.get("grid_warning") {
        summary.notes.push(format!("grid warning: {w}"));
    }
    let path = out.join("linear_spectrum.txt");
    spec.write(&path)?;
    summary.wrote(path);

    if let Some(measured_path) = &config.linear.measured {
        let measured = Spectrum1D::<f64>::read(measured_path)?;
        let report = overlay(&spec, &measured)?;
        let mut table = DataTable::new("overlay", &["freq_thz", "measured", "simulated", "residual"]);
        table.metadata.set("rms_residual", fmt_f64(report.rms_residual));
        table.metadata.set("max_abs_residual", fmt_f64(report.max_abs_residual));
        for r in &report.rows {
            table.push(r.to_vec());
        }
        let path = out.join("overlay.txt");
        table.write(&path)?;
        summary.notes.push(format!("overlay rms residual {:e}", report.rms_residual));
        summary.wrote(path);
    }
    Ok(())
}

/// Boxes lying inside both axes; the rest are reported and skipped.
fn usable_boxes<'a>(boxes: &'a [PeakBox], dq: &Axis, em: &Axis, summary: &mut RunSummary) -> Vec<&'a PeakBox> {
    boxes
        .iter()
        .filter(|b| {
            let inside = [b.dq_range.0, b.dq_range.1].iter().all(|v| dq.contains(*v))
                && [b.emission_range.0, b.emission_range.1].iter().all(|v| em.contains(*v));
            if !inside {
                summary.notes.push(format!("box `{}` lies outside the grid and was skipped", b.label));
            }
            inside
        })
        .collect()
}

fn cmd_dq2d(config: &RunConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let tau = config.dq2d.tau()?;
    let dq = config.dq2d.dq_grid.axis("dq2d.dq_grid")?;
    let em = config.dq2d.emission_grid.axis("dq2d.emission_grid")?;
    let pairs = match config.dq2d.mode {
        Dq2dMode::SinglePair => vec![(config.dq2d.pair.pair()?, 1.0)],
        Dq2dMode::Ensemble => {
            let ens = sample_ensemble(&config.ensemble)?;
            let pairs = pairs_from_ensemble(&ens, config.material.eps_r(), config.ensemble_delta_d())?;
            if pairs.is_empty() {
                return Err(Error::invalid(format!(
                    "ensemble of {} emitters yields no pairs",
                    ens.emitters.len()
                )));
            }
            pairs
        }
    };
    let mut spec = grid_response(&pairs, tau, dq, em)?;
    spec.metadata.set(
        "mode",
        match config.dq2d.mode {
            Dq2dMode::SinglePair => "single-pair",
            Dq2dMode::Ensemble => "ensemble",
        },
    );
    let path = out.join("dq2d_spectrum.txt");
    spec.write(&path, config.dq2d.with_magnitude)?;
    summary.wrote(path);

    let boxes = usable_boxes(&config.dq2d.boxes, &dq, &em, summary);
    if !boxes.is_empty() {
        let labels: Vec<&str> = boxes.iter().map(|b| b.label.as_str()).collect();
        let mut table = DataTable::new("peak_integrals", &labels);
        table.metadata.set("row_order", "magnitude real imaginary");
        table.metadata.set("units", "THz^2 x response");
        for mode in [IntegrationMode::Magnitude, IntegrationMode::Real, IntegrationMode::Imaginary] {
            table.push(boxes.iter().map(|b| integrate_peak(&spec, b, mode)).collect::<Result<_>>()?);
        }
        let path = out.join("dq2d_boxes.txt");
        table.write(&path)?;
        summary.wrote(path);
    }
    Ok(())
}

fn cmd_pump_sweep(config: &RunConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let tau = config.dq2d.tau()?;
    let pair = config.dq2d.pair.pair()?;
    let model = config.pump.model()?;
    if let Some(w) = model.dephasing_warning() {
        summary.notes.push(w);
    }
    let fields = config.pump.fields()?;
    let dq = config.dq2d.dq_grid.axis("dq2d.dq_grid")?;
    let em = config.dq2d.emission_grid.axis("dq2d.emission_grid")?;
    let slice_thz = config.pump.slice_omega_dq(&pair) / RAD_PER_THZ;
    let slice_row = dq
        .nearest_index(slice_thz)
        .ok_or_else(|| Error::Config(format!("slice omega_T {slice_thz} THz lies outside dq2d.dq_grid")))?;
    let boxes = usable_boxes(&config.dq2d.boxes, &dq, &em, summary);
    let pulse = config.pulse_params()?;
    let p_pi = pi_power(&pulse)?;

    let mut columns = vec!["E_over_E_pi", "E", "power_mw"];
    columns.extend(boxes.iter().map(|b| b.label.as_str()));
    let mut table = DataTable::new("pump_sweep", &columns);
    table.metadata.set("e_pi", fmt_f64(model.e_pi));
    table.metadata.set("integration", format!("{:?}", config.pump.integration).to_lowercase());
    table.metadata.set("p_pi_mw", fmt_f64(p_pi * 1e3));
    table.metadata.set("spot_diameter_um", fmt_f64(pulse.spot_diameter_m * 1e6));
    table.metadata.set("tau_s", fmt_f64(tau));
    table.metadata.set("slice_omega_T_thz", fmt_f64(dq.value(slice_row)));

    let mut slices = Vec::with_capacity(fields.len());
    for &e in &fields {
        let p = pair.with_delta(pump_delta(e, &model));
        let mut spec = grid_response(&[(p, 1.0)], tau, dq, em)?;
        let scale = model.amplitude * model.amplitude_factor(e);
        for v in spec.values.iter_mut() {
            *v *= scale;
        }
        let mut row = vec![e / model.e_pi, e, power_from_field(e / model.e_pi, p_pi) * 1e3];
        for b in &boxes {
            row.push(integrate_peak(&spec, b, config.pump.integration)?);
        }
        table.push(row);
        slices.push(extract_slice(&spec, SliceAxis::OmegaT, dq.value(slice_row))?.amplitude);
    }
    let path = out.join("pump_sweep.txt");
    table.write(&path)?;
    summary.wrote(path);

    let dataset = SliceDataset {
        pump_values: fields,
        axis: em,
        slices,
        weights: None,
        omega_dq: read_scaled(dq.value(slice_row), 1.0 / RAD_PER_THZ),
        tau,
    };
    let manifest = dataset.write(out, "slice")?;
    summary.files.extend((0..dataset.slices.len()).map(|k| out.join(format!("slice_{k:03}.txt"))));
    summary.wrote(manifest);
    Ok(())
}

/// Truth scaled by `1 + u`, `u` uniform in `[-spread, spread]`, for every
/// model parameter.
fn perturb(truth: &FitParams, spread: f64, seed: u64) -> FitParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = || if spread > 0.0 { 1.0 + rng.random_range(-spread..=spread) } else { 1.0 };
    FitParams {
        delta_s0: truth.delta_s0 * f(),
        delta_d0: truth.delta_d0 * f(),
        delta_s1: truth.delta_s1 * f(),
        delta_d1: truth.delta_d1 * f(),
        e_pi: truth.e_pi * f(),
        amplitude: truth.amplitude * f(),
        ..*truth
    }
}

fn cmd_fit(config: &RunConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let model = config.pump.model()?;
    let pair = config.dq2d.pair.pair()?;
    let from_config = FitParams {
        delta_s0: model.delta_s0,
        delta_d0: model.delta_d0,
        delta_s1: model.delta_s1,
        delta_d1: model.delta_d1,
        e_pi: model.e_pi,
        amplitude: model.amplitude,
        pair: pair.with_delta(Complex64::new(0.0, 0.0)),
        argument: model.argument,
    };
    let (data, mut initial) = match &config.fit.manifest {
        Some(m) => (SliceDataset::read_manifest(m)?, from_config),
        None => {
            let tau = config.dq2d.tau()?;
            let axis = config.fit.synthetic_grid.axis("fit.synthetic_grid")?;
            let omega_dq = config.pump.slice_omega_dq(&pair);
            let data = generate_synthetic(
                &from_config,
                &config.pump.fields()?,
                axis,
                omega_dq,
                tau,
                config.fit.noise,
                config.fit.seed,
            )?;
            let dir = out.join("synthetic");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let manifest = data.write(&dir, "synthetic")?;
            summary.wrote(manifest);
            let start = perturb(&from_config, config.fit.perturbation, config.fit.seed ^ 0x9e37_79b9_7f4a_7c15);
            let path = out.join("fit_truth.txt");
            write_file(&path, &from_config.to_text())?;
            summary.wrote(path);
            (data, start)
        }
    };
    if let Some(p) = &config.fit.initial {
        initial = FitParams::read(p)?;
    }
    let path = out.join("fit_initial.txt");
    write_file(&path, &initial.to_text())?;
    summary.wrote(path);

    let result = fit_slices(&data, &initial, &config.fit.options)?;
    let path = out.join("fit_report.txt");
    write_file(&path, &result.to_text())?;
    summary.wrote(path);
    let mut history = DataTable::new("fit_history", &["step", "cost"]);
    for (k, c) in result.cost_history.iter().enumerate() {
        history.push(vec![k as f64, *c]);
    }
    let path = out.join("fit_history.txt");
    history.write(&path)?;
    summary.wrote(path);
    summary.notes.push(format!(
        "fit {} after {} iterations ({}), relative residual {:e}",
        if result.converged { "converged" } else { "did not converge" },
        result.iterations,
        result.termination,
        result.relative_residual
    ));
    summary.converged = result.converged;
    Ok(())
}

fn cmd_oracle(config: &RunConfig, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let tau = config.dq2d.tau()?;
    let pair = config.dq2d.pair.pair()?;
    let grid = config.oracle.grid();
    let spec = perturbative_dq2d(&pair, tau, &grid, None, [0.0; 4])?;
    let path = out.join("oracle_spectrum.txt");
    spec.write(&path, config.dq2d.with_magnitude)?;
    summary.wrote(path);

    let cmp = compare_with_closed_form(&spec, &pair, &config.oracle.crop(&pair))?;
    let zero = perturbative_dq2d(&pair.with_delta(Complex64::new(0.0, 0.0)), tau, &grid, None, [0.0; 4])?;
    let zero_rel = if spec.max_abs() > 0.0 { zero.max_abs() / spec.max_abs() } else { zero.max_abs() };
    let mut table = DataTable::new("oracle_comparison", &["rms_relative", "points", "closed_form_max", "zero_delta_relative"]);
    table.metadata.set("source", "oracle");
    table.push(vec![cmp.rms_relative, cmp.points as f64, cmp.closed_form_max, zero_rel]);
    let path = out.join("oracle_comparison.txt");
    table.write(&path)?;
    summary.wrote(path);
    summary.notes.push(format!(
        "oracle vs closed form: rms {:.3}%, zero-interaction channel {zero_rel:e}",
        100.0 * cmp.rms_relative
    ));

    let n = config.oracle.rabi_points;
    let mut rabi = DataTable::new(
        "population_check",
        &["theta", "ground_oracle", "double_oracle", "ground_closed", "double_closed"],
    );
    rabi.metadata.set("source", "oracle");
    rabi.metadata.set("steps_per_pulse", config.oracle.rabi_steps_per_pulse);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64;
        let (g, d) = rabi_populations_oracle(theta, config.oracle.rabi_steps_per_pulse)?;
        let (g0, d0) = rabi_populations(theta);
        worst = worst.max((g - g0).abs()).max((d - d0).abs());
        rabi.push(vec![theta, g, d, g0, d0]);
    }
    rabi.metadata.set("max_abs_error", fmt_f64(worst));
    let path = out.join("population_check.txt");
    rabi.write(&path)?;
    summary.wrote(path);
    Ok(())
}

fn cmd_selfcheck(out: &Path, summary: &mut RunSummary) -> Result<()> {
    let outcomes = crate::selfcheck::run_all();
    let mut meta = Metadata::new().with("format", "selfcheck");
    for o in &outcomes {
        meta.set(o.name.replace(' ', "_"), format!("{} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail));
        summary.notes.push(o.to_string());
    }
    summary.failed_checks = outcomes.iter().filter(|o| !o.passed).count();
    let mut text = String::new();
    meta.write_to(&mut text);
    let path = out.join("selfcheck.txt");
    write_file(&path, &text)?;
    summary.wrote(path);
    Ok(())
}
