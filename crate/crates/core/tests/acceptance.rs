//! The ten acceptance criteria, run in sequence so that the timings are not
//! distorted by other tests. Each prints one PASS/FAIL line on stderr.

use std::f64::consts::{LN_2, PI};
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dipolar::config::RunConfig;
use dipolar::coupling::{diagonalize_single_excitation, dipole_coupling, CouplingMatrix, WeightRule};
use dipolar::dq2d::{eq1_response, grid_response, integrate_peak, IntegrationMode, PairSystem, PeakBox};
use dipolar::ensemble::{sample_ensemble, EnsembleConfig};
use dipolar::fit::{fit_slices, generate_synthetic, FitOptions, FitParams, SliceDataset};
use dipolar::oracle::{perturbative_dq2d, rabi_populations_oracle, TimeGrid};
use dipolar::rabi::{area_from_power, spot_for_pi, AmplitudeLaw, PulseParams, PumpArgument, PumpModel};
use dipolar::spectrum::{Axis, ComplexSpectrum1D, Spectrum1D, Spectrum2D};
use dipolar::textio::DataTable;

const GHZ: f64 = 2.0 * PI * 1e9;
const THZ: f64 = 2.0 * PI * 1e12;
// Independent copies of the SI constants.
const EPS0: f64 = 8.8541878188e-12;
const PLANCK: f64 = 6.62607015e-34;
const HBAR: f64 = PLANCK / (2.0 * PI);
const LIGHT: f64 = 299_792_458.0;
const DEBYE_SI: f64 = 3.335_640_951_981_52e-30;

/// Printed straight to the process stderr so it shows without --nocapture.
fn report(n: usize, passed: bool, detail: String) -> bool {
    let tag = if passed { "PASS" } else { "FAIL" };
    let line = format!("acceptance criterion {n:>2}: {tag} | {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    passed
}

fn pair(f1: f64, g1: f64, f2: f64, g2: f64, mu: f64, delta: Complex64) -> PairSystem {
    PairSystem::new(
        dipolar::units::ComplexFrequency::new(f1 * THZ, g1 * GHZ),
        dipolar::units::ComplexFrequency::new(f2 * THZ, g2 * GHZ),
        mu,
        mu,
        delta,
    )
}

fn criterion_1() -> bool {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut nonzero_reference: f64 = 0.0;
    for _ in 0..1000 {
        let (f1, f2) = (406.0 + rng.random::<f64>(), 406.0 + rng.random::<f64>());
        let p = pair(
            f1,
            rng.random_range(0.05..20.0),
            f2,
            rng.random_range(0.05..20.0),
            rng.random_range(1.0..20.0) * DEBYE_SI,
            Complex64::new(0.0, 0.0),
        );
        let tau = rng.random_range(0.0..2e-11);
        let (c_dq, c_em) = (f1 + f2, 0.5 * (f1 + f2));
        for i in 0..64 {
            let w_dq = (c_dq + (i as f64 - 31.5) * 0.005) * THZ;
            for j in 0..64 {
                let w_em = (c_em + (j as f64 - 31.5) * 0.01) * THZ;
                worst = worst.max(eq1_response(&p, tau, w_dq, w_em).unwrap().norm());
            }
        }
        let on = p.with_delta(Complex64::new(GHZ, -GHZ));
        nonzero_reference = nonzero_reference.max(eq1_response(&on, tau, c_dq * THZ, f1 * THZ).unwrap().norm());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst == 0.0 && nonzero_reference > 0.0 && secs < 5.0,
        format!("1000 pairs x 64x64, max |S| = {worst:e}, {secs:.2} s"),
    )
}

fn criterion_2() -> bool {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..17 {
        let theta = 2.0 * PI * k as f64 / 16.0;
        let (g, d) = rabi_populations_oracle(theta, 400).unwrap();
        let c = (theta / 2.0).cos().powi(4);
        let s = (theta / 2.0).sin().powi(4);
        worst = worst.max((g - c).abs()).max((d - s).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        2,
        worst < 1e-3 && secs < 10.0,
        format!("17 pulse areas, max population error {worst:e}, {secs:.2} s"),
    )
}

fn criterion_3() -> bool {
    let start = Instant::now();
    let delta = Complex64::new(6.0 * GHZ, -2.0 * GHZ);
    let p = pair(406.7, 1.33, 406.7, 1.33, 1.0, delta);
    let grid = TimeGrid {
        n_dq: 512,
        step_dq: 2e-12,
        n_em: 1024,
        step_em: 1.5e-12,
    };
    let spec = perturbative_dq2d(&p, 0.0, &grid, None, [0.0; 4]).unwrap();
    // Matched grid: the oracle's own axes, restricted to the peak region.
    let (mut num, mut den, mut points) = (0.0, 0.0, 0);
    for r in 0..spec.rows() {
        let f_dq = spec.dq_axis.value(r);
        if (f_dq - 813.406).abs() > 0.03 {
            continue;
        }
        for c in 0..spec.cols() {
            let f_em = spec.emission_axis.value(c);
            if (f_em - 406.7).abs() > 0.04 {
                continue;
            }
            let exact = eq1_response(&p, 0.0, f_dq * THZ, f_em * THZ).unwrap();
            num += (spec.at(r, c) - exact).norm_sqr();
            den += exact.norm_sqr();
            points += 1;
        }
    }
    let rms = (num / den).sqrt();
    let zero = perturbative_dq2d(&p.with_delta(Complex64::new(0.0, 0.0)), 0.0, &grid, None, [0.0; 4]).unwrap();
    let zero_rel = zero.max_abs() / spec.max_abs();
    let secs = start.elapsed().as_secs_f64();
    report(
        3,
        rms < 0.02 && zero_rel < 1e-10 && secs < 60.0,
        format!(
            "rms {:.3}% over {points} points, zero-interaction channel {zero_rel:e}, {secs:.2} s",
            100.0 * rms
        ),
    )
}

fn criterion_4() -> bool {
    let mu = 14.3 * DEBYE_SI;
    let (eps_r, r): (f64, f64) = (5.76, 10e-9);
    let hand = mu * mu / (4.0 * PI * EPS0 * eps_r * PLANCK * r.powi(3));
    let z = Vector3::z() * mu;
    let perp = dipole_coupling(&z, &z, &Vector3::new(r, 0.0, 0.0), eps_r).unwrap();
    let inline = dipole_coupling(&z, &z, &Vector3::new(0.0, 0.0, r), eps_r).unwrap();
    let ghz = perp / 1e9;
    report(
        4,
        (ghz / 5.36 - 1.0).abs() < 0.01 && (perp / hand - 1.0).abs() < 1e-6 && inline == -2.0 * perp,
        format!(
            "perpendicular {ghz:.4} GHz (hand {:.4}), head-to-tail ratio {}",
            hand / 1e9,
            inline / perp
        ),
    )
}

fn criterion_5() -> bool {
    let start = Instant::now();
    // Effective density 1e18 cm^-3 x 10% = 1e23 m^-3; N ~ 1000 needs 1e-20 m^3.
    let edge_nm = 1e-20f64.cbrt() * 1e9;
    let base = EnsembleConfig {
        implanted_density_cm3: 1e18,
        yield_fraction: 0.1,
        box_nm: [edge_nm; 3],
        ..Default::default()
    };
    let mut couplings = Vec::new();
    let mut total = 0usize;
    for k in 0..100u64 {
        let ens = sample_ensemble(&EnsembleConfig {
            seed: 500 + k,
            ..base.clone()
        })
        .unwrap();
        let e = &ens.emitters;
        total += e.len();
        for i in 0..e.len() {
            let mut best = (f64::INFINITY, 0);
            for j in 0..e.len() {
                let d = (e[j].position - e[i].position).norm_squared();
                if j != i && d < best.0 {
                    best = (d, j);
                }
            }
            let j = best.1;
            let rv = e[j].position - e[i].position;
            let r = rv.norm();
            let u = rv / r;
            let (a, b) = (e[i].dipole_vector(), e[j].dipole_vector());
            let jv = (a.dot(&b) - 3.0 * a.dot(&u) * b.dot(&u)) / (4.0 * PI * EPS0 * 5.76 * PLANCK * r.powi(3));
            couplings.push(jv.abs());
        }
    }
    couplings.sort_by(f64::total_cmp);
    let n = couplings.len();
    let median = 0.5 * (couplings[(n - 1) / 2] + couplings[n / 2]) / 1e9;
    let secs = start.elapsed().as_secs_f64();
    report(
        5,
        (0.1..=10.0).contains(&median) && secs < 120.0,
        format!(
            "median nearest-neighbour |J| {median:.3} GHz, 100 realizations, mean N {:.0}, {secs:.2} s",
            total as f64 / 100.0
        ),
    )
}

fn criterion_6() -> bool {
    let w0 = 406.7 * THZ;
    let mut worst: f64 = 0.0;
    for (det, j) in [(0.0, 5.36), (0.0, -1.2), (8.0, 5.36), (-40.0, 0.3), (1.0, 20.0)] {
        let (d, jj) = (det * GHZ, j * GHZ);
        let m = CouplingMatrix::from_dense(DMatrix::from_row_slice(2, 2, &[w0 + d / 2.0, jj, jj, w0 - d / 2.0])).unwrap();
        let lines = diagonalize_single_excitation(&m, &[1.0, 1.0], WeightRule::Incoherent).unwrap();
        let split = lines.line_centers[1] - lines.line_centers[0];
        let expected = if det == 0.0 { 2.0 * jj.abs() } else { 2.0 * (d * d / 4.0 + jj * jj).sqrt() };
        worst = worst.max((split / expected - 1.0).abs());
    }
    report(6, worst < 1e-9, format!("max relative splitting error {worst:e}"))
}

fn reference_truth() -> FitParams {
    let w = dipolar::units::ComplexFrequency::new(406.7 * THZ, 1.0 / 120e-12);
    FitParams {
        delta_s0: 6.0 * GHZ,
        delta_d0: 2.0 * GHZ,
        delta_s1: -200.0 * GHZ,
        delta_d1: 50.0 * GHZ,
        e_pi: 1.0,
        amplitude: Complex64::new(1.0, 0.0),
        pair: PairSystem::new(w, w, 14.3 * DEBYE_SI, 14.3 * DEBYE_SI, Complex64::new(0.0, 0.0)),
        argument: PumpArgument::HalfPi,
    }
}

fn criterion_7() -> bool {
    let start = Instant::now();
    let truth = reference_truth();
    let fields: Vec<f64> = (0..17).map(|k| k as f64 / 8.0).collect();
    let axis = Axis::linspace(406.4, 407.0, 601).unwrap();
    let w_dq = 2.0 * 406.7 * THZ + truth.delta_s0;

    let clean = generate_synthetic(&truth, &fields, axis, w_dq, 0.0, 0.0, 0).unwrap();
    let fixed = fit_slices(&clean, &truth, &FitOptions::default()).unwrap();

    let mut recovered = 0;
    let mut non_converged = 0;
    for seed in 0..100u64 {
        let data = generate_synthetic(&truth, &fields, axis, w_dq, 0.0, 0.01, 10_000 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77 + seed);
        let mut f = || 1.0 + rng.random_range(-0.3..=0.3);
        let init = FitParams {
            delta_s0: truth.delta_s0 * f(),
            delta_d0: truth.delta_d0 * f(),
            delta_s1: truth.delta_s1 * f(),
            delta_d1: truth.delta_d1 * f(),
            e_pi: truth.e_pi * f(),
            amplitude: truth.amplitude * f(),
            ..truth
        };
        let fit = fit_slices(&data, &init, &FitOptions::default()).unwrap();
        non_converged += usize::from(!fit.converged);
        let p = fit.params;
        let ok = [
            (p.delta_s0, truth.delta_s0),
            (p.delta_d0, truth.delta_d0),
            (p.delta_s1, truth.delta_s1),
            (p.delta_d1, truth.delta_d1),
        ]
        .iter()
        .all(|(got, want)| (got / want - 1.0).abs() < 0.1);
        recovered += usize::from(ok);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        7,
        recovered >= 90 && fixed.relative_residual < 1e-20 && secs < 600.0,
        format!(
            "{recovered}/100 seeds within 10% ({non_converged} hit max_iter), fixed-point residual {:e}, {secs:.1} s",
            fixed.relative_residual
        ),
    )
}

fn box_intensity(model: &PumpModel, e: f64) -> f64 {
    let p0 = pair(406.7, 1.33, 406.7, 1.33, 14.3 * DEBYE_SI, Complex64::new(0.0, 0.0));
    let p = p0.with_delta(dipolar::rabi::pump_delta(e, model));
    let dq = Axis::linspace(813.2, 813.6, 201).unwrap();
    let em = Axis::linspace(406.6, 406.8, 101).unwrap();
    let mut spec = grid_response(&[(p, 1.0)], 0.0, dq, em).unwrap();
    let scale = model.amplitude * model.amplitude_factor(e);
    for v in spec.values.iter_mut() {
        *v *= scale;
    }
    integrate_peak(&spec, &PeakBox::around("B", 813.406, 406.7, 0.03), IntegrationMode::Magnitude).unwrap()
}

fn criterion_8() -> bool {
    let mut model = PumpModel {
        e_pi: 1.0,
        delta_s0: 6.0 * GHZ,
        delta_d0: 2.0 * GHZ,
        delta_s1: -200.0 * GHZ,
        delta_d1: 50.0 * GHZ,
        amplitude: Complex64::new(1.0, 0.0),
        argument: PumpArgument::HalfPi,
        law: AmplitudeLaw::Rabi,
    };
    let fields: Vec<f64> = (0..=440).map(|k| k as f64 * 0.005).collect();
    let rabi: Vec<f64> = fields.iter().map(|e| box_intensity(&model, *e)).collect();
    let first_min = (1..rabi.len() - 1)
        .find(|&k| rabi[k] < rabi[k - 1] && rabi[k] <= rabi[k + 1])
        .map(|k| fields[k]);
    let recovery = rabi[400] / rabi[0];
    // Deepest point before 2 E_pi, for the report.
    let (k_null, _) = rabi[..400]
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, v)| if *v < b.1 { (k, *v) } else { b });
    let first_depth = first_min.map(|e| rabi[(e / 0.005).round() as usize] / rabi[0]);
    model.law = AmplitudeLaw::Saturation {
        strength: 0.8,
        e_sat: 0.5,
    };
    let sat: Vec<f64> = fields.iter().map(|e| box_intensity(&model, *e)).collect();
    let monotone = sat.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let null_ok = first_min.is_some_and(|e| (e - 1.0).abs() <= 0.02);
    report(
        8,
        null_ok && recovery > 0.9 && monotone,
        format!(
            "first local minimum at E/E_pi = {:?} (I/I(0) = {:?}), deepest point at {}, I(2E_pi)/I(0) = {recovery:.6}, saturation monotone: {monotone}",
            first_min, first_depth, fields[k_null]
        ),
    )
}

/// Pulse area by hand: Gaussian pulse, Gaussian spot, field transmitted
/// through the surface.
fn hand_area(power: f64, spot: f64, correction: f64) -> f64 {
    let (rep, fwhm, mu) = (75.5e6, 200e-15, 14.3 * DEBYE_SI);
    let energy = power / rep;
    let w = spot / 2.0;
    let area = PI * w * w / 2.0;
    let peak_intensity = energy / (area * fwhm * (PI / (4.0 * LN_2)).sqrt());
    let e0 = correction * (2.0 * peak_intensity / (LIGHT * EPS0)).sqrt();
    mu / HBAR * e0 * fwhm * (PI / (2.0 * LN_2)).sqrt()
}

fn criterion_9() -> bool {
    let correction = 2.0 / (1.0 + 2.4);
    let params = PulseParams {
        rep_rate_hz: 75.5e6,
        fwhm_duration_s: 200e-15,
        dipole_moment: 14.3 * DEBYE_SI,
        spot_diameter_m: 10e-6,
        field_correction: correction,
    };
    let spot = spot_for_pi(11.4e-3, &params).unwrap();
    // Bisection on the hand formula; area falls with spot size.
    let (mut lo, mut hi): (f64, f64) = (1e-9, 1e-2);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if hand_area(11.4e-3, mid, correction) > PI {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let agreement = (spot / lo - 1.0).abs();
    let mut worst_scaling: f64 = 0.0;
    for p in [1e-6, 3.3e-4, 11.4e-3, 0.2] {
        let a = area_from_power(p, &params).unwrap();
        let b = area_from_power(4.0 * p, &params).unwrap();
        worst_scaling = worst_scaling.max((b / a - 2.0).abs() / 2.0);
    }
    report(
        9,
        (0.5e-6..=50e-6).contains(&spot) && agreement < 1e-6 && worst_scaling < 1e-12,
        format!(
            "spot diameter {:.3} um (hand bisection {:.3} um), sqrt(P) scaling error {worst_scaling:e}",
            spot * 1e6,
            lo * 1e6
        ),
    )
}

const SMALL_CONFIG: &str = r#"
[ensemble]
box_nm = [80.0, 80.0, 80.0]
seed = 11

[linear]
realizations = 3

[linear.grid]
start_thz = 405.9
stop_thz = 407.1
points = 601

[dq2d]
tau_ps = 1.5

[dq2d.dq_grid]
start_thz = 813.3
stop_thz = 813.5
points = 101

[dq2d.emission_grid]
start_thz = 406.6
stop_thz = 406.8
points = 101

[[dq2d.boxes]]
label = "B"
dq_range = [813.376, 813.436]
emission_range = [406.67, 406.73]

[pump]
field_points = 9

[fit.synthetic_grid]
start_thz = 406.5
stop_thz = 406.9
points = 201

[oracle]
n_dq = 256
step_dq_ps = 4.0
n_em = 512
step_em_ps = 3.0
rabi_points = 5
"#;

fn run(bin: &str, args: &[&str], out: &Path) -> i32 {
    let status = Command::new(bin)
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    status.status.code().unwrap_or(-1)
}

fn files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            v.extend(files(&p));
        } else {
            v.push(p);
        }
    }
    v.sort();
    v
}

/// Parse, serialize and parse again; the two serializations must agree
/// with each other and with the file on disk.
fn fixpoint(path: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let src = path.display().to_string();
    let name = path.file_name().unwrap().to_string_lossy().to_string();
    let again = |t: &str| -> Result<String, String> {
        let err = |e: dipolar::Error| e.to_string();
        if name.ends_with(".toml") {
            return Ok(RunConfig::parse(t, &src, true).map_err(err)?.0.to_toml().map_err(err)?);
        }
        if name.ends_with("_manifest.txt") {
            let dir = tempfile::tempdir().unwrap();
            let ds = SliceDataset::read_manifest(path).map_err(err)?;
            let stem = name.trim_end_matches("_manifest.txt");
            let m = ds.write(dir.path(), stem).map_err(err)?;
            let back = SliceDataset::read_manifest(&m).map_err(err)?;
            if back != ds {
                return Err("manifest dataset changed".into());
            }
            return std::fs::read_to_string(m).map_err(|e| e.to_string());
        }
        let format = t
            .lines()
            .find_map(|l| l.strip_prefix("# format: "))
            .ok_or("no format header")?
            .trim()
            .to_string();
        Ok(match format.as_str() {
            "ensemble" => dipolar::ensemble::Ensemble::from_text(t, &src).map_err(err)?.to_text(),
            "spectrum1d" if t.contains("# values: complex") => ComplexSpectrum1D::from_text(t, &src).map_err(err)?.to_text(),
            "spectrum1d" => Spectrum1D::<f64>::from_text(t, &src).map_err(err)?.to_text(),
            "spectrum2d" => {
                let s = Spectrum2D::from_text(t, &src).map_err(err)?;
                s.to_text(t.contains("magnitude"))
            }
            "fit_params" => FitParams::from_text(t, &src).map_err(err)?.to_text(),
            "fit_report" => {
                // A report reads back as its parameter set.
                let p = FitParams::from_text(t, &src).map_err(err)?;
                let q = FitParams::from_text(&p.to_text(), &src).map_err(err)?;
                if p != q {
                    return Err("report parameters changed".into());
                }
                t.to_string()
            }
            "selfcheck" => {
                let table = dipolar::textio::Table::parse(t, &src).map_err(err)?;
                let mut out = String::new();
                table.metadata.write_to(&mut out);
                out
            }
            _ => DataTable::from_text(t, &src).map_err(err)?.to_text(),
        })
    };
    let once = again(&text)?;
    let twice = again(&once)?;
    if once != twice {
        return Err(format!("{name}: second serialization differs"));
    }
    if !name.ends_with("_manifest.txt") && once != text {
        return Err(format!("{name}: serialization differs from the file"));
    }
    Ok(())
}

fn criterion_10() -> bool {
    let bin = env!("CARGO_BIN_EXE_dipolar");
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("run.toml");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let cfg = cfg.to_str().unwrap();
    let mut problems = Vec::new();
    let mut checked = 0;
    for cmd in ["ensemble", "linear", "dq2d", "pump-sweep", "fit", "oracle"] {
        let a = root.path().join(format!("{cmd}_a"));
        let b = root.path().join(format!("{cmd}_b"));
        for dir in [&a, &b] {
            let code = run(bin, &["--config", cfg, "--strict", cmd], dir);
            if code != 0 {
                problems.push(format!("{cmd} exited {code}"));
            }
        }
        let (fa, fb) = (files(&a), files(&b));
        if fa.len() != fb.len() || fa.is_empty() {
            problems.push(format!("{cmd}: file sets differ"));
            continue;
        }
        for (x, y) in fa.iter().zip(&fb) {
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                problems.push(format!("{cmd}: {} differs between runs", x.display()));
            }
            if let Err(e) = fixpoint(x) {
                problems.push(format!("{cmd}: {e}"));
            }
            checked += 1;
        }
    }
    let start = Instant::now();
    let selfcheck = run(bin, &["selfcheck"], &root.path().join("selfcheck"));
    let secs = start.elapsed().as_secs_f64();
    if selfcheck != 0 {
        problems.push(format!("selfcheck exited {selfcheck}"));
    }
    report(
        10,
        problems.is_empty(),
        format!(
            "{checked} files identical across runs and at fixpoint, selfcheck exit {selfcheck} ({secs:.1} s){}",
            if problems.is_empty() { String::new() } else { format!("; problems: {}", problems.join("; ")) }
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let results = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
