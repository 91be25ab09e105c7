//! Python bindings: crystal and coupling tables, simulated signal grids,
//! spectra, peaks, and the phase-noise model.

use ion2d::cli::{self, RunConfig};
use ion2d::constants::{hz_to_rad, rad_to_hz, rad_to_khz, CA40_ION_MASS};
use ion2d::spectrum::{self, FftOptions, Window};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: ion2d::Error) -> PyErr {
    PyValueError::new_err(format!("[{}] {e}", e.module()))
}

fn parse_config(json: &str) -> PyResult<RunConfig> {
    RunConfig::from_json(json).and_then(|c| c.resolve()).map_err(py_err)
}

/// Linear ion chain with its harmonic normal modes.
#[pyclass(frozen)]
struct Crystal {
    inner: ion2d::crystal::Crystal,
}

#[pymethods]
impl Crystal {
    #[new]
    #[pyo3(signature = (n_ions, freq_x_hz, freq_y_hz, freq_z_hz, mass=CA40_ION_MASS))]
    fn new(n_ions: usize, freq_x_hz: f64, freq_y_hz: f64, freq_z_hz: f64, mass: f64) -> PyResult<Self> {
        let trap = ion2d::crystal::TrapConfig::new(n_ions, mass, hz_to_rad(freq_x_hz), hz_to_rad(freq_y_hz), hz_to_rad(freq_z_hz)).map_err(py_err)?;
        Ok(Self { inner: ion2d::crystal::Crystal::new(trap).map_err(py_err)? })
    }

    #[getter]
    fn positions_m(&self) -> Vec<f64> {
        self.inner.chain.positions().to_vec()
    }

    #[getter]
    fn alpha_x(&self) -> f64 {
        self.inner.modes.alpha_x
    }

    #[getter]
    fn alpha_y(&self) -> f64 {
        self.inner.modes.alpha_y
    }

    #[getter]
    fn zigzag_frequency_hz(&self) -> f64 {
        rad_to_hz(self.inner.zigzag_frequency())
    }

    /// Mode frequencies in Hz as `(z, x, y)` lists, indexed by mode.
    fn mode_frequencies_hz(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (m, wz) = (&self.inner.modes, self.inner.trap.omega_z);
        let n = m.n_modes();
        (
            (0..n).map(|k| rad_to_hz(m.axial_frequency(k, wz))).collect(),
            (0..n).map(|k| rad_to_hz(m.x_frequency(k, wz))).collect(),
            (0..n).map(|k| rad_to_hz(m.y_frequency(k, wz))).collect(),
        )
    }

    /// Columns are mode eigenvectors.
    fn mode_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.modes.m.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Rows `(quantity, third_khz, fourth_khz, effective_khz)`.
    fn parameter_table(&self) -> PyResult<Vec<(String, f64, f64, f64)>> {
        let (_, p) = ion2d::anharmonic::derive_parameters(&self.inner, &Default::default()).map_err(py_err)?;
        Ok(p.rows(self.inner.modes.zigzag())
            .into_iter()
            .map(|r| (r.quantity.to_string(), rad_to_khz(r.third), rad_to_khz(r.fourth), rad_to_khz(r.effective)))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("Crystal(n_ions={}, alpha_x={:.6}, alpha_y={:.6})", self.inner.chain.n_ions(), self.alpha_x(), self.alpha_y())
    }
}

/// Phase-cycled signal `s(t₁, t₃)`.
#[pyclass(frozen)]
struct SignalGrid {
    inner: ion2d::protocol::SignalGrid,
    carrier_offset_hz: f64,
}

#[pymethods]
impl SignalGrid {
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn t1(&self) -> Vec<f64> {
        self.inner.t1.clone()
    }

    #[getter]
    fn t3(&self) -> Vec<f64> {
        self.inner.t3.clone()
    }

    #[getter]
    fn carrier_offset_hz(&self) -> f64 {
        self.carrier_offset_hz
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.values.dim()
    }

    fn values(&self) -> Vec<Vec<Complex64>> {
        self.inner.values.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// 2D spectrum; `window` is "none" or "cosine".
    #[pyo3(signature = (window="none", zero_pad=1, notch=false))]
    fn spectrum(&self, window: &str, zero_pad: usize, notch: bool) -> PyResult<Spectrum> {
        let window = match window {
            "none" => Window::None,
            "cosine" => Window::Cosine,
            w => return Err(PyValueError::new_err(format!("unknown window {w:?}"))),
        };
        let opts = FftOptions { window, zero_pad, carrier_offset: hz_to_rad(self.carrier_offset_hz), notch };
        Ok(Spectrum { inner: spectrum::fft2(&self.inner, &opts).map_err(py_err)? })
    }
}

#[pyclass(frozen)]
struct Spectrum {
    inner: spectrum::Spectrum2D,
}

#[pymethods]
impl Spectrum {
    #[getter]
    fn omega1_hz(&self) -> Vec<f64> {
        self.inner.omega1.iter().map(|&w| rad_to_hz(w)).collect()
    }

    #[getter]
    fn omega3_hz(&self) -> Vec<f64> {
        self.inner.omega3.iter().map(|&w| rad_to_hz(w)).collect()
    }

    #[getter]
    fn bin_width_hz(&self) -> f64 {
        rad_to_hz(self.inner.bin_width)
    }

    fn magnitude(&self) -> Vec<Vec<f64>> {
        self.inner.magnitude.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    /// Local maxima above `threshold·max` as `(omega1_hz, omega3_hz, magnitude, label)`.
    #[pyo3(signature = (threshold=0.05))]
    fn find_peaks(&self, threshold: f64) -> PyResult<Vec<(f64, f64, f64, String)>> {
        Ok(spectrum::find_peaks(&self.inner, threshold)
            .map_err(py_err)?
            .into_iter()
            .map(|p| (rad_to_hz(p.omega1), rad_to_hz(p.omega3), p.magnitude, p.label))
            .collect())
    }

    /// FWHM in Hz along (ω₁, ω₃) of the peak nearest the given position.
    fn peak_widths_hz(&self, omega1_hz: f64, omega3_hz: f64) -> PyResult<(f64, f64)> {
        let (a, b) = spectrum::peak_widths(&self.inner, hz_to_rad(omega1_hz), hz_to_rad(omega3_hz)).map_err(py_err)?;
        Ok((rad_to_hz(a), rad_to_hz(b)))
    }

    /// Normalised power along each circular diagonal offset (in bins).
    fn diagonal_offset_profile(&self) -> PyResult<Vec<(isize, f64)>> {
        spectrum::diagonal_offset_profile(&self.inner).map_err(py_err)
    }
}

/// Simulate a kerr or resonance configuration given as JSON.
#[pyfunction]
fn simulate(py: Python<'_>, config_json: &str) -> PyResult<SignalGrid> {
    let cfg = parse_config(config_json)?;
    let sim = py.detach(|| cli::simulate(&cfg)).map_err(py_err)?;
    Ok(SignalGrid { inner: sim.grid, carrier_offset_hz: sim.model.carrier_offset_hz })
}

/// Run a scenario and write its artifacts; returns the manifest as JSON.
#[pyfunction]
fn run_scenario(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg = RunConfig::from_json(config_json).map_err(py_err)?;
    let manifest = py.detach(|| cli::run_scenario(&cfg)).map_err(py_err)?;
    serde_json::to_string(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `(K, eigenvalues)` of the resonant exchange Hamiltonian, rad/s.
#[pyfunction]
fn resonant_manifolds(omega_t: f64, max_quanta: usize) -> PyResult<Vec<(usize, Vec<f64>)>> {
    Ok(ion2d::anharmonic::resonant_manifolds(omega_t, max_quanta).map_err(py_err)?.into_iter().map(|m| (m.charge, m.eigenvalues)).collect())
}

/// Fractional signal loss for phase signature `q` under diffusion `c` (rad²/s).
#[pyfunction]
fn contrast_loss(q: [i32; 3], t1: f64, t3: f64, c: f64) -> PyResult<f64> {
    Ok(ion2d::phasenoise::contrast_loss(q, t1, t3, c).map_err(py_err)?.loss)
}

#[pyfunction]
fn reference_diffusion() -> f64 {
    ion2d::phasenoise::reference_diffusion()
}

#[pyclass(frozen)]
struct WienerPhaseModel {
    inner: ion2d::phasenoise::WienerPhaseModel,
}

#[pymethods]
impl WienerPhaseModel {
    #[new]
    #[pyo3(signature = (diffusion, seed=0))]
    fn new(diffusion: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: ion2d::phasenoise::WienerPhaseModel::new(diffusion, seed).map_err(py_err)? })
    }

    /// Rows are paths, columns the requested times.
    fn sample_paths(&self, times: Vec<f64>, n_paths: usize) -> PyResult<Vec<Vec<f64>>> {
        let a = self.inner.sample_paths(&times, n_paths).map_err(py_err)?;
        Ok(a.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Monte Carlo `(mean attenuation, standard error)`.
    fn attenuation(&self, py: Python<'_>, q: [i32; 3], t1: f64, t3: f64, n_paths: usize) -> PyResult<(f64, f64)> {
        py.detach(|| self.inner.attenuation(q, t1, t3, n_paths)).map_err(py_err)
    }
}

#[pymodule]
fn pyion2d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Crystal>()?;
    m.add_class::<SignalGrid>()?;
    m.add_class::<Spectrum>()?;
    m.add_class::<WienerPhaseModel>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(resonant_manifolds, m)?)?;
    m.add_function(wrap_pyfunction!(contrast_loss, m)?)?;
    m.add_function(wrap_pyfunction!(reference_diffusion, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
