//! Scenario runner: configuration, simulation, analysis and artifacts.

mod config;
pub mod output;

use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use config::{NoiseSettings, RunConfig, Scenario, TrapSettings};
use output::{csv, num, ArtifactWriter, Matrix, OutputFile};

use crate::anharmonic::{
    c3_tensor, c4_tensor, derive_parameters, mode_tensors, resonant_coupling, EffectiveParams, ModeId, ModeTensors, ResonantCoupling, ThirdOrderOptions,
};
use crate::constants::{rad_to_hz, rad_to_khz};
use crate::crystal::{Crystal, TrapConfig};
use crate::dynamics::{build_propagator, heating_dissipator, LindbladModel, PropagatorStats};
use crate::error::{Error, Result};
use crate::fock::FockRegister;
use crate::phasenoise::{contrast_loss, loss_table, WienerPhaseModel};
use crate::protocol::{grid_points, scan_with, KerrModel, PulseSequence, PulseSet, ResonanceModel, SignalGrid};
use crate::spectrum::{diagonal_offset_profile, fft2, find_peaks, peak_widths, project_1d, Axis, FftOptions, Peak, Spectrum1D, Spectrum2D};

pub const DISSIPATION_MODEL: &str = "heating: collapse operators sqrt(ndot) a and sqrt(ndot) a^dagger (infinite-temperature symmetric rates)";
pub const PULSE_TIMING: &str = "pulse 1 at 0, pulses 2 and 3 at t1, pulse 4 at t1 + t3";

/// Parameter table row in kHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterRowKhz {
    pub quantity: String,
    pub third_khz: f64,
    pub fourth_khz: f64,
    pub effective_khz: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub alpha_x: f64,
    pub alpha_y: f64,
    pub zigzag_frequency_hz: f64,
    pub parameters: Vec<ParameterRowKhz>,
    pub omega_t_khz: Option<f64>,
    pub resonant_alpha_x: Option<f64>,
    pub stretch_detuning_hz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub evolution: String,
    pub dissipation: String,
    pub grid_points: usize,
    pub dt: f64,
    pub t_max: f64,
    pub bin_width_hz: f64,
    pub carrier_offset_hz: f64,
    pub propagator: Option<PropagatorStats>,
    pub pulse_timing: String,
    pub phase_noise_diffusion: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestError {
    pub module: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub status: String,
    pub error: Option<ManifestError>,
    pub config: RunConfig,
    pub derived: Option<Derived>,
    pub model: Option<ModelInfo>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
}

/// Crystal plus every derived coupling for a resolved configuration.
pub struct TrapAnalysis {
    pub crystal: Crystal,
    pub tensors: ModeTensors,
    /// Absent when perturbation theory fails at a resonant trap.
    pub params: Option<EffectiveParams>,
    pub resonance: Option<ResonantCoupling>,
    pub derived: Derived,
    pub warnings: Vec<String>,
}

pub fn analyse_trap(config: &RunConfig) -> Result<TrapAnalysis> {
    let t = config.trap.as_ref().ok_or_else(|| Error::Config("configuration not resolved".into()))?;
    let trap = TrapConfig::new(
        t.n_ions,
        t.mass,
        crate::constants::hz_to_rad(t.freq_x_hz),
        crate::constants::hz_to_rad(t.freq_y_hz),
        crate::constants::hz_to_rad(t.freq_z_hz),
    )?;
    let crystal = Crystal::new(trap)?;
    let options = ThirdOrderOptions { terms: config.third_order_terms.unwrap_or_default(), ..ThirdOrderOptions::default() };
    let mut warnings = Vec::new();
    let (tensors, params) = match derive_parameters(&crystal, &options) {
        Ok((t, p)) => (t, Some(p)),
        // the perturbative shifts break down exactly where the resonant treatment applies
        Err(e) if config.scenario == Scenario::Resonance => {
            warnings.push(format!("parameter table skipped: {e}"));
            (mode_tensors(&c3_tensor(&crystal.chain), &c4_tensor(&crystal.chain), &crystal.modes.m)?, None)
        }
        Err(e) => return Err(e),
    };
    let mut derived = Derived {
        alpha_x: crystal.modes.alpha_x,
        alpha_y: crystal.modes.alpha_y,
        zigzag_frequency_hz: rad_to_hz(crystal.zigzag_frequency()),
        parameters: params
            .iter()
            .flat_map(|p| p.rows(crystal.modes.zigzag()))
            .map(|r| ParameterRowKhz {
                quantity: r.quantity,
                third_khz: rad_to_khz(r.third),
                fourth_khz: rad_to_khz(r.fourth),
                effective_khz: rad_to_khz(r.effective),
            })
            .collect(),
        ..Derived::default()
    };
    let mut resonance = None;
    if crystal.modes.n_modes() >= 3 {
        let r = resonant_coupling(&crystal, &tensors, config.resonance_window.unwrap_or(1e-3))?;
        derived.omega_t_khz = Some(rad_to_khz(r.omega_t));
        derived.resonant_alpha_x = Some(r.resonant_alpha_x);
        derived.stretch_detuning_hz = Some(0.0 - rad_to_hz(r.detuning));
        if config.scenario == Scenario::Resonance {
            warnings.extend(r.warning.clone());
        }
        resonance = Some(r);
    }
    Ok(TrapAnalysis { crystal, tensors, params, resonance, derived, warnings })
}

/// Simulated grid for the kerr or resonance scenario.
pub struct Simulation {
    pub grid: SignalGrid,
    pub analysis: TrapAnalysis,
    pub model: ModelInfo,
    pub warnings: Vec<String>,
}

fn pulse_sequence(c: &RunConfig) -> PulseSequence {
    PulseSequence::uniform(c.amplitude.unwrap(), c.n_phi.unwrap(), c.signature.unwrap())
}

/// Runs the time-domain part of a resolved kerr or resonance configuration.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    let c = config;
    if !matches!(c.scenario, Scenario::Kerr | Scenario::Resonance) {
        return Err(Error::Config(format!("scenario {} has no time evolution", c.scenario.name())));
    }
    let analysis = analyse_trap(c)?;
    let mut warnings = analysis.warnings.clone();
    let dims = c.dims.clone().unwrap();
    let nbar = c.nbar.clone().unwrap();
    let heating: Vec<f64> = c.heating_per_ms.as_ref().unwrap().iter().map(|h| h * 1e3).collect();
    let dt = c.dt.unwrap();
    let t_max = c.t_max.unwrap() * c.grid_scale.unwrap();
    let n = grid_points(t_max, dt)?;
    let seq = pulse_sequence(c);
    let budget = c.memory_budget_bytes.unwrap();
    let crystal = &analysis.crystal;
    let carrier = -crystal.zigzag_frequency();
    let dissipative = heating.iter().any(|&h| h > 0.0);

    let mut propagator = None;
    let (grid, evolution) = match c.scenario {
        Scenario::Kerr => {
            let n_modes = crystal.modes.n_modes();
            let p = &analysis.params.as_ref().ok_or_else(|| Error::Config("kerr scenario needs the effective parameters".into()))?.effective;
            let model = KerrModel {
                omega_si: p.omega_si,
                delta_omega: p.delta_omega_zz,
                couplings: vec![p.dephasing(ModeId::y(n_modes - 1)), p.dephasing(ModeId::z(n_modes - 1))],
                dim_zz: dims[0],
                spectator_dims: dims[1..].to_vec(),
                nbar_zz: nbar[0],
                spectator_nbar: nbar[1..].to_vec(),
            };
            warnings.extend(seq.warnings(&FockRegister::new(vec![dims[0]], vec!["zz".into()])?));
            if c.fast_path.unwrap() {
                (model.scan_fast(&seq, n, dt)?, "diagonal fast path, thermal average over spectator occupations".to_string())
            } else {
                let (unitary, rho0) = model.dense()?;
                let reg = unitary.register.clone();
                let mut collapse = Vec::new();
                for (slot, &h) in heating.iter().enumerate() {
                    collapse.extend(heating_dissipator(slot, h, &reg)?);
                }
                let lm = LindbladModel::new(unitary.h, collapse, reg)?;
                let prop = build_propagator(&lm, dt, budget)?;
                propagator = Some(prop.stats());
                let pulses = PulseSet::new(&seq, &lm.register)?;
                (scan_with(&prop, &rho0, &pulses, &seq, n, dt)?, "dense propagator on the full register".to_string())
            }
        }
        _ => {
            let r = analysis.resonance.as_ref().ok_or_else(|| Error::Config("the resonance scenario needs at least three ions".into()))?;
            let model = ResonanceModel {
                omega_t: r.omega_t,
                dims: [dims[0], dims[1]],
                nbar: [nbar[0], nbar[1]],
                heating: [heating[0], heating[1]],
                stretch_detuning: -r.detuning,
            };
            let (lm, rho0) = model.build()?;
            warnings.extend(seq.warnings(&lm.register));
            let prop = build_propagator(&lm, dt, budget)?;
            propagator = Some(prop.stats());
            let pulses = PulseSet::new(&seq, &lm.register)?;
            (scan_with(&prop, &rho0, &pulses, &seq, n, dt)?, "dense propagator on the [zz, str] register".to_string())
        }
    };
    let grid = match c.phase_noise {
        Some(diff) if diff > 0.0 => apply_phase_noise(grid, seq.signature, diff)?,
        _ => grid,
    };
    warnings.sort();
    warnings.dedup();
    let model = ModelInfo {
        evolution,
        dissipation: if dissipative { DISSIPATION_MODEL.to_string() } else { "none (dissipation-free)".to_string() },
        grid_points: n,
        dt,
        t_max,
        bin_width_hz: 1.0 / (n as f64 * dt),
        carrier_offset_hz: rad_to_hz(carrier),
        propagator,
        pulse_timing: PULSE_TIMING.to_string(),
        phase_noise_diffusion: c.phase_noise,
    };
    Ok(Simulation { grid, analysis, model, warnings })
}

/// Multiply each grid value by `1 − Δs(t₁, t₃)`.
pub fn apply_phase_noise(mut grid: SignalGrid, q: [i32; 3], diffusion: f64) -> Result<SignalGrid> {
    let (t1, t3) = (grid.t1.clone(), grid.t3.clone());
    for ((i, j), v) in grid.values.indexed_iter_mut() {
        *v *= 1.0 - contrast_loss(q, t1[i], t3[j], diffusion)?.loss;
    }
    Ok(grid)
}

/// Spectra and peaks of a simulated grid.
pub struct Analysis {
    /// Raw bins, used for peak positions.
    pub raw: Spectrum2D,
    /// With the configured window, padding and notch, as written out.
    pub display: Spectrum2D,
    pub peaks: Vec<Peak>,
    /// FWHM along (ω₁, ω₃) of each peak on an ×8 padded spectrum, rad/s.
    pub widths: Vec<Option<(f64, f64)>>,
    pub projection_omega1: Spectrum1D,
    pub projection_omega3: Spectrum1D,
    pub offset_profile: Vec<(isize, f64)>,
}

pub fn analyse(sim: &Simulation, config: &RunConfig) -> Result<Analysis> {
    let carrier = crate::constants::hz_to_rad(sim.model.carrier_offset_hz);
    let raw_opts = FftOptions { carrier_offset: carrier, ..FftOptions::default() };
    let raw = fft2(&sim.grid, &raw_opts)?;
    let display = fft2(
        &sim.grid,
        &FftOptions { window: config.window.unwrap(), zero_pad: config.zero_pad.unwrap(), carrier_offset: carrier, notch: config.notch.unwrap() },
    )?;
    let line_opts = FftOptions { window: config.window.unwrap(), zero_pad: config.zero_pad.unwrap(), carrier_offset: carrier, notch: false };
    let peaks = find_peaks(&raw, config.peak_threshold.unwrap())?;
    let padded = fft2(&sim.grid, &FftOptions { zero_pad: 8, ..raw_opts })?;
    let widths = peaks.iter().map(|p| peak_widths(&padded, p.omega1, p.omega3).ok()).collect();
    Ok(Analysis {
        projection_omega1: project_1d(&sim.grid, Axis::Omega1, &line_opts)?,
        projection_omega3: project_1d(&sim.grid, Axis::Omega3, &line_opts)?,
        offset_profile: diagonal_offset_profile(&raw)?,
        raw,
        display,
        peaks,
        widths,
    })
}

fn parameters_csv(rows: &[ParameterRowKhz]) -> String {
    csv(
        &["quantity", "third_order_khz", "fourth_order_khz", "effective_khz"],
        rows.iter().map(|r| vec![r.quantity.clone(), num(r.third_khz), num(r.fourth_khz), num(r.effective_khz)]),
    )
}

fn tensor_csvs(t: &ModeTensors) -> (String, String) {
    let d3 = csv(&["a", "b", "c", "d3"], t.d3.indexed_iter().map(|((a, b, c), v)| vec![a.to_string(), b.to_string(), c.to_string(), num(*v)]));
    let d4 = csv(
        &["a", "b", "c", "d", "d4"],
        t.d4.indexed_iter().map(|((a, b, c, d), v)| vec![a.to_string(), b.to_string(), c.to_string(), d.to_string(), num(*v)]),
    );
    (d3, d4)
}

fn spectrum_csv(s: &Spectrum2D) -> String {
    csv(
        &["omega1_hz", "omega3_hz", "magnitude"],
        s.magnitude.indexed_iter().map(|((i, j), m)| vec![num(rad_to_hz(s.omega1[i])), num(rad_to_hz(s.omega3[j])), num(*m)]),
    )
}

fn projection_csv(p: &Spectrum1D) -> String {
    csv(&["omega_hz", "magnitude"], p.omega.iter().zip(&p.magnitude).map(|(w, m)| vec![num(rad_to_hz(*w)), num(*m)]))
}

fn peaks_csv(a: &Analysis) -> String {
    csv(
        &["rank", "omega1_hz", "omega3_hz", "magnitude", "label", "fwhm_omega1_hz", "fwhm_omega3_hz"],
        a.peaks.iter().zip(&a.widths).enumerate().map(|(k, (p, w))| {
            let (w1, w3) = w.map(|(a, b)| (num(rad_to_hz(a)), num(rad_to_hz(b)))).unwrap_or_default();
            vec![k.to_string(), num(rad_to_hz(p.omega1)), num(rad_to_hz(p.omega3)), num(p.magnitude), p.label.clone(), w1, w3]
        }),
    )
}

fn write_dynamic(w: &mut ArtifactWriter, sim: &Simulation, a: &Analysis) -> Result<()> {
    w.matrix("signal.bin", &Matrix::Complex(sim.grid.values.clone()))?;
    w.matrix("spectrum.bin", &Matrix::Complex(a.display.values.clone()))?;
    w.text("spectrum.csv", &spectrum_csv(&a.display))?;
    w.text("projection_omega1.csv", &projection_csv(&a.projection_omega1))?;
    w.text("projection_omega3.csv", &projection_csv(&a.projection_omega3))?;
    w.text("peaks.csv", &peaks_csv(a))?;
    w.text("diagonal_profile.csv", &csv(&["offset_bins", "relative_power"], a.offset_profile.iter().map(|(k, p)| vec![k.to_string(), num(*p)])))?;
    w.text("parameters.csv", &parameters_csv(&sim.analysis.derived.parameters))
}

/// `tables` scenario: crystal and anharmonic couplings only.
pub fn tables_only(config: &RunConfig) -> Result<(TrapAnalysis, String)> {
    let analysis = analyse_trap(config)?;
    let text = parameters_csv(&analysis.derived.parameters);
    Ok((analysis, text))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub signature: [i32; 3],
    pub analytic_percent: f64,
    pub monte_carlo_percent: f64,
    pub standard_error_percent: f64,
}

pub fn noise_table(settings: &NoiseSettings, seed: u64) -> Result<Vec<NoiseRow>> {
    let model = WienerPhaseModel::new(settings.diffusion, seed)?;
    loss_table(settings.t1, settings.t3, settings.diffusion)?
        .into_iter()
        .map(|row| {
            let (att, err) = model.attenuation(row.signature, settings.t1, settings.t3, settings.paths)?;
            Ok(NoiseRow {
                signature: row.signature,
                analytic_percent: 100.0 * row.loss,
                monte_carlo_percent: 100.0 * (1.0 - att),
                standard_error_percent: 100.0 * err,
            })
        })
        .collect()
}

fn execute(config: &RunConfig, w: &mut ArtifactWriter, derived: &mut Option<Derived>, model: &mut Option<ModelInfo>, warnings: &mut Vec<String>) -> Result<()> {
    match config.scenario {
        Scenario::Tables => {
            let (analysis, text) = tables_only(config)?;
            w.text("parameters.csv", &text)?;
            let (d3, d4) = tensor_csvs(&analysis.tensors);
            w.text("tensor_d3.csv", &d3)?;
            w.text("tensor_d4.csv", &d4)?;
            *derived = Some(analysis.derived);
        }
        Scenario::NoiseTable => {
            let s = config.noise.clone().unwrap_or_default();
            let rows = noise_table(&s, config.seed.unwrap_or(0))?;
            w.text(
                "noise_table.csv",
                &csv(
                    &["p2", "p3", "p4", "analytic_percent", "monte_carlo_percent", "standard_error_percent"],
                    rows.iter().map(|r| {
                        let [a, b, c] = r.signature;
                        vec![a.to_string(), b.to_string(), c.to_string(), num(r.analytic_percent), num(r.monte_carlo_percent), num(r.standard_error_percent)]
                    }),
                ),
            )?;
            for q in crate::phasenoise::TABLE_SIGNATURES {
                warnings.extend(contrast_loss(q, s.t1, s.t3, s.diffusion)?.warning);
            }
        }
        Scenario::Kerr | Scenario::Resonance => {
            let sim = simulate(config)?;
            let a = analyse(&sim, config)?;
            write_dynamic(w, &sim, &a)?;
            warnings.extend(sim.warnings.iter().cloned());
            *model = Some(sim.model);
            *derived = Some(sim.analysis.derived);
        }
    }
    Ok(())
}

/// Resolve, run and write all artifacts plus `manifest.json`. The manifest is
/// written on failure too, with the error recorded.
pub fn run_scenario(config: &RunConfig) -> Result<RunManifest> {
    let start = Instant::now();
    let resolved = config.resolve();
    let cfg = resolved.as_ref().cloned().unwrap_or_else(|_| config.clone());
    let dir = cfg.out_dir.clone().unwrap_or_else(|| "out".into());
    let mut w = ArtifactWriter::new(&dir)?;
    let (mut derived, mut model, mut warnings) = (None, None, Vec::new());
    let result = match resolved {
        Ok(c) => execute(&c, &mut w, &mut derived, &mut model, &mut warnings),
        Err(e) => Err(e),
    };
    let manifest = RunManifest {
        tool: "ion2d".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.scenario.name().into(),
        status: if result.is_ok() { "ok" } else { "error" }.into(),
        error: result.as_ref().err().map(|e| ManifestError { module: e.module().into(), message: e.to_string() }),
        config: cfg,
        derived,
        model,
        warnings,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: w.files.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(format!("serializing manifest: {e}")))?;
    let path = dir.join("manifest.json");
    std::fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    result.map(|_| manifest)
}

/// Read a complex matrix written by the runner.
pub fn read_complex_matrix(path: &Path) -> Result<Array2<C64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    match output::decode_matrix(&bytes)? {
        Matrix::Complex(m) => Ok(m),
        Matrix::Real(m) => Ok(m.mapv(|x| C64::new(x, 0.0))),
    }
}
