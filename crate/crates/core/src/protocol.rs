//! The four-displacement protocol with `t₂ = t₄ = 0`:
//!
//! `s(t₁,t₃,φ) = tr[M D₄ E(t₃) D₃ D₂ E(t₁) D₁ ρ₀ D₁† … D₄†]`
//!
//! followed by phase cycling over the pulse phases. Scans propagate states
//! forward along `t₁` and the measured observable backward along `t₃`
//! (Heisenberg picture), so every grid value is a single inner product.

use std::f64::consts::TAU;

use ndarray::{s, Array2, Array3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anharmonic::resonant_hamiltonian;
use crate::dynamics::{build_propagator, checked_step, heating_dissipator, hermitize, LindbladModel, Propagator};
use crate::error::{Error, Result};
use crate::fock::{displacement, embed, mode_operators, product_operator, thermal_state, truncation_warning, FockRegister};
use crate::linalg::{dagger, trace, CMatrix};

/// Tolerance on the imaginary part of raw (uncycled) signals.
pub const IMAG_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    /// `|α_k|` for the four pulses.
    pub amplitudes: [f64; 4],
    /// `N_φ` for pulses 2, 3 and 4; pulse 1 sets the phase reference.
    pub phase_counts: [usize; 3],
    /// `(q₂, q₃, q₄)`
    pub signature: [i32; 3],
    /// Register slot that is displaced.
    pub target_slot: usize,
    /// Register slot whose occupation is measured.
    pub measure_slot: usize,
}

impl PulseSequence {
    pub fn uniform(amplitude: f64, n_phi: usize, signature: [i32; 3]) -> Self {
        Self { amplitudes: [amplitude; 4], phase_counts: [n_phi; 3], signature, target_slot: 0, measure_slot: 0 }
    }

    pub fn validate(&self, register: &FockRegister) -> Result<()> {
        if self.target_slot >= register.n_modes() || self.measure_slot >= register.n_modes() {
            return Err(Error::Protocol("pulse target or measured slot outside the register".into()));
        }
        if self.phase_counts.contains(&0) {
            return Err(Error::Protocol("phase counts must be positive".into()));
        }
        if self.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Protocol("pulse amplitudes must be finite".into()));
        }
        Ok(())
    }

    /// Advisory notes: aliasing risk and truncation warnings.
    pub fn warnings(&self, register: &FockRegister) -> Vec<String> {
        let mut out = Vec::new();
        for (k, (&n, &q)) in self.phase_counts.iter().zip(&self.signature).enumerate() {
            if n < q.unsigned_abs() as usize + 2 {
                out.push(format!("pulse {}: N_phi = {n} < |q| + 2 = {}; higher orders alias onto the signature", k + 2, q.abs() + 2));
            }
        }
        if let Some(&d) = register.dims.get(self.target_slot) {
            for &a in &self.amplitudes {
                if let Some(w) = truncation_warning(C64::new(a, 0.0), d) {
                    out.push(w);
                }
            }
        }
        out.dedup();
        out
    }

    pub fn total_phases(&self) -> usize {
        self.phase_counts.iter().product()
    }
}

/// `φ_j = 2πj/N`
pub fn phase_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| TAU * j as f64 / n as f64).collect()
}

/// `⌊t_max/Δt⌋ + 1`, robust to round-off in the ratio.
pub fn grid_points(t_max: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && t_max >= 0.0 && dt.is_finite() && t_max.is_finite()) {
        return Err(Error::Protocol(format!("invalid time grid t_max = {t_max}, dt = {dt}")));
    }
    Ok((t_max / dt + 1e-9).floor() as usize + 1)
}

/// Fourier extraction `(1/N_tot) Σ s(φ) e^{−i q·φ}`; `raw` is indexed `[j₂][j₃][j₄]`.
pub fn phase_cycle(raw: &Array3<f64>, signature: [i32; 3]) -> C64 {
    let (n2, n3, n4) = raw.dim();
    let w = cycle_weights([n2, n3, n4], signature);
    raw.iter().zip(w.iter()).map(|(r, w)| w * r).sum()
}

fn cycle_weights(counts: [usize; 3], q: [i32; 3]) -> Array3<C64> {
    let p: Vec<Vec<f64>> = counts.iter().map(|&n| phase_grid(n)).collect();
    let total = (counts[0] * counts[1] * counts[2]) as f64;
    Array3::from_shape_fn((counts[0], counts[1], counts[2]), |(a, b, c)| {
        let phase = q[0] as f64 * p[0][a] + q[1] as f64 * p[1][b] + q[2] as f64 * p[2][c];
        C64::from_polar(1.0 / total, -phase)
    })
}

/// Free evolution over one grid step, in both pictures.
pub trait StepEvolution: Sync {
    fn dim(&self) -> usize;
    fn forward(&self, rho: &CMatrix) -> CMatrix;
    fn adjoint(&self, obs: &CMatrix) -> CMatrix;
}

impl StepEvolution for Propagator {
    fn dim(&self) -> usize {
        Propagator::dim(self)
    }
    fn forward(&self, rho: &CMatrix) -> CMatrix {
        self.apply(rho)
    }
    fn adjoint(&self, obs: &CMatrix) -> CMatrix {
        self.apply_adjoint(obs)
    }
}

/// `exp(−iH Δt)` for diagonal `H`, applied as elementwise phases.
#[derive(Clone, Debug)]
pub struct DiagonalPhase {
    phases: Array2<C64>,
}

impl DiagonalPhase {
    pub fn new(energies: &[f64], dt: f64) -> Self {
        let n = energies.len();
        let phases = Array2::from_shape_fn((n, n), |(a, b)| C64::from_polar(1.0, -(energies[a] - energies[b]) * dt));
        Self { phases }
    }
}

impl StepEvolution for DiagonalPhase {
    fn dim(&self) -> usize {
        self.phases.nrows()
    }
    fn forward(&self, rho: &CMatrix) -> CMatrix {
        rho * &self.phases
    }
    fn adjoint(&self, obs: &CMatrix) -> CMatrix {
        obs * &self.phases.mapv(|z| z.conj())
    }
}

/// Pulses and measurement operator for a sequence on a register.
#[derive(Clone, Debug)]
pub struct PulseSet {
    pub d1: CMatrix,
    /// `D₃(φ₃) D₂(φ₂)` indexed `[j₂][j₃]`, flattened row-major.
    pub middle: Vec<CMatrix>,
    /// `D₄(φ₄)† M D₄(φ₄)`
    pub observables: Vec<CMatrix>,
    pub measurement: CMatrix,
}

impl PulseSet {
    pub fn new(seq: &PulseSequence, register: &FockRegister) -> Result<Self> {
        seq.validate(register)?;
        let d = register.dims[seq.target_slot];
        let pulse = |k: usize, phi: f64| embed(&displacement(C64::from_polar(seq.amplitudes[k], phi), d), seq.target_slot, register);
        let d1 = pulse(0, 0.0)?;
        let p2 = phase_grid(seq.phase_counts[0]);
        let p3 = phase_grid(seq.phase_counts[1]);
        let p4 = phase_grid(seq.phase_counts[2]);
        let mut middle = Vec::with_capacity(p2.len() * p3.len());
        let d3s: Vec<CMatrix> = p3.iter().map(|&f| pulse(2, f)).collect::<Result<_>>()?;
        for &f2 in &p2 {
            let d2 = pulse(1, f2)?;
            for d3 in &d3s {
                middle.push(d3.dot(&d2));
            }
        }
        let n = mode_operators(register.dims[seq.measure_slot])?.n;
        let measurement = embed(&n, seq.measure_slot, register)?;
        let observables = p4
            .iter()
            .map(|&f| {
                let d4 = pulse(3, f)?;
                Ok(dagger(&d4).dot(&measurement).dot(&d4))
            })
            .collect::<Result<_>>()?;
        Ok(Self { d1, middle, observables, measurement })
    }
}

/// Complex phase-cycled signal on a uniform `(t₁, t₃)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalGrid {
    pub dt: f64,
    pub t1: Vec<f64>,
    pub t3: Vec<f64>,
    pub values: Array2<C64>,
    /// Largest imaginary part of any raw signal before cycling.
    pub max_imag_residual: f64,
}

impl SignalGrid {
    pub fn new(dt: f64, values: Array2<C64>, max_imag_residual: f64) -> Self {
        let (n1, n3) = values.dim();
        Self { dt, t1: (0..n1).map(|k| k as f64 * dt).collect(), t3: (0..n3).map(|k| k as f64 * dt).collect(), values, max_imag_residual }
    }
}

/// Single raw signal with `n1`, `n3` propagator steps and phases `(φ₂,φ₃,φ₄)`.
pub fn run_once(
    evolution: &dyn StepEvolution,
    rho0: &CMatrix,
    seq: &PulseSequence,
    register: &FockRegister,
    n1: usize,
    n3: usize,
    phases: [f64; 3],
) -> Result<f64> {
    seq.validate(register)?;
    let d = register.dims[seq.target_slot];
    let pulse = |k: usize, phi: f64| embed(&displacement(C64::from_polar(seq.amplitudes[k], phi), d), seq.target_slot, register);
    let conj = |u: &CMatrix, r: &CMatrix| u.dot(r).dot(&dagger(u));
    let mut rho = conj(&pulse(0, 0.0)?, rho0);
    for _ in 0..n1 {
        rho = checked_step(&rho, |r| evolution.forward(r))?;
    }
    rho = conj(&pulse(1, phases[0])?, &rho);
    rho = conj(&pulse(2, phases[1])?, &rho);
    for _ in 0..n3 {
        rho = checked_step(&rho, |r| evolution.forward(r))?;
    }
    rho = conj(&pulse(3, phases[2])?, &rho);
    let m = embed(&mode_operators(register.dims[seq.measure_slot])?.n, seq.measure_slot, register)?;
    let value = trace(&m.dot(&rho));
    if value.im.abs() > IMAG_TOL * value.re.abs().max(1.0) {
        return Err(Error::Protocol(format!("raw signal has imaginary part {:.3e}", value.im)));
    }
    Ok(value.re)
}

/// Row-major `vec` of `m` as a slice-ready vector.
fn flat(m: &CMatrix) -> Vec<C64> {
    m.iter().copied().collect()
}

/// Phase-cycled grid for one initial state and step evolution.
///
/// Deterministic: every value is computed by the same sequence of floating
/// point operations regardless of how rayon schedules the rows.
pub fn scan_with(evolution: &dyn StepEvolution, rho0: &CMatrix, pulses: &PulseSet, seq: &PulseSequence, n_points: usize, dt: f64) -> Result<SignalGrid> {
    let dim = evolution.dim();
    if rho0.dim() != (dim, dim) {
        return Err(Error::Protocol(format!("initial state shape {:?} does not match dimension {dim}", rho0.dim())));
    }
    if n_points == 0 {
        return Err(Error::Protocol("grid needs at least one point".into()));
    }
    let d2 = dim * dim;
    let n23 = pulses.middle.len();
    let n4 = pulses.observables.len();

    // forward: ρ(t₁) after pulse 1
    let mut states = Vec::with_capacity(n_points);
    let mut rho = pulses.d1.dot(rho0).dot(&dagger(&pulses.d1));
    hermitize(&mut rho);
    for i in 0..n_points {
        if i > 0 {
            rho = checked_step(&rho, |r| evolution.forward(r)).map_err(|e| Error::Protocol(format!("t1 step {i}: {e}")))?;
        }
        states.push(rho.clone());
    }
    // σ(t₁, φ₂, φ₃) rows, vec'd
    let sigma_rows: Vec<Vec<C64>> = states.par_iter().map(|st| pulses.middle.iter().flat_map(|u| flat(&u.dot(st).dot(&dagger(u)))).collect()).collect();
    let sigma = Array2::from_shape_vec((n_points * n23, d2), sigma_rows.concat()).expect("state block shape");

    // backward: O(t₃, φ₄) = E†ⁿ(D₄† M D₄), stored as vec(Oᵀ)
    let chains: Vec<Vec<CMatrix>> = pulses
        .observables
        .par_iter()
        .map(|o| {
            let mut out = Vec::with_capacity(n_points);
            let mut cur = o.clone();
            for k in 0..n_points {
                if k > 0 {
                    cur = evolution.adjoint(&cur);
                    hermitize(&mut cur);
                }
                out.push(cur.t().to_owned());
            }
            out
        })
        .collect();
    let mut obs = Array2::<C64>::zeros((n_points * n4, d2));
    for k in 0..n_points {
        for (l, chain) in chains.iter().enumerate() {
            obs.row_mut(k * n4 + l).assign(&ndarray::ArrayView1::from(&flat(&chain[k])));
        }
    }

    let weights = cycle_weights(seq.phase_counts, seq.signature);
    let obs_t = obs.t();
    let rows: Vec<(Vec<C64>, f64)> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let block = sigma.slice(s![i * n23..(i + 1) * n23, ..]);
            let raw = block.dot(&obs_t); // (n23) × (n_points · n4)
            let mut worst: f64 = 0.0;
            let mut row = vec![C64::new(0.0, 0.0); n_points];
            for (k, out) in row.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n23 {
                    for l in 0..n4 {
                        let r = raw[[j, k * n4 + l]];
                        worst = worst.max(r.im.abs() / r.re.abs().max(1.0));
                        acc += weights[[j / seq.phase_counts[1], j % seq.phase_counts[1], l]] * r.re;
                    }
                }
                *out = acc;
            }
            (row, worst)
        })
        .collect();
    let mut values = Array2::zeros((n_points, n_points));
    let mut worst: f64 = 0.0;
    for (i, (row, w)) in rows.into_iter().enumerate() {
        worst = worst.max(w);
        values.row_mut(i).assign(&ndarray::Array1::from(row));
    }
    if worst > IMAG_TOL {
        return Err(Error::Protocol(format!("raw signals have imaginary residual {worst:.3e} > {IMAG_TOL:e}")));
    }
    Ok(SignalGrid::new(dt, values, worst))
}

/// Zigzag mode with self-interaction and static cross-Kerr shifts from
/// thermally occupied spectator modes. Diagonal in the product Fock basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrModel {
    /// rad/s
    pub omega_si: f64,
    /// Zigzag frequency shift in the rotating frame, rad/s.
    pub delta_omega: f64,
    /// Cross-Kerr coupling to each spectator, rad/s per quantum.
    pub couplings: Vec<f64>,
    pub dim_zz: usize,
    pub spectator_dims: Vec<usize>,
    pub nbar_zz: f64,
    pub spectator_nbar: Vec<f64>,
}

impl KerrModel {
    pub fn validate(&self) -> Result<()> {
        let n = self.couplings.len();
        if self.spectator_dims.len() != n || self.spectator_nbar.len() != n {
            return Err(Error::Protocol(format!(
                "kerr model: {n} couplings, {} spectator dims, {} spectator occupations",
                self.spectator_dims.len(),
                self.spectator_nbar.len()
            )));
        }
        let finite = [self.omega_si, self.delta_omega].iter().chain(&self.couplings).all(|x| x.is_finite());
        if !finite {
            return Err(Error::Protocol("kerr model: non-finite frequency".into()));
        }
        Ok(())
    }

    /// Zigzag level energies for spectator occupations `m`.
    pub fn energies(&self, m: &[usize]) -> Vec<f64> {
        let shift: f64 = self.delta_omega + self.couplings.iter().zip(m).map(|(c, &k)| c * k as f64).sum::<f64>();
        (0..self.dim_zz)
            .map(|n| {
                let n = n as f64;
                0.5 * self.omega_si * n * (n - 1.0) + shift * n
            })
            .collect()
    }

    /// `[zz, spectators…]`
    pub fn register(&self) -> Result<FockRegister> {
        let mut dims = vec![self.dim_zz];
        dims.extend(&self.spectator_dims);
        let labels = (0..dims.len()).map(|k| if k == 0 { "zz".to_string() } else { format!("spectator{k}") }).collect();
        FockRegister::new(dims, labels)
    }

    /// Spectator configurations with their thermal weights, first spectator slowest.
    pub fn spectator_configurations(&self) -> Result<Vec<(Vec<usize>, f64)>> {
        self.validate()?;
        let probs: Vec<Vec<f64>> =
            self.spectator_nbar.iter().zip(&self.spectator_dims).map(|(&nb, &d)| Ok(thermal_state(nb, d)?.probabilities)).collect::<Result<_>>()?;
        let total: usize = self.spectator_dims.iter().product();
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut occ = vec![0; self.spectator_dims.len()];
            for k in (0..occ.len()).rev() {
                occ[k] = rem % self.spectator_dims[k];
                rem /= self.spectator_dims[k];
            }
            let w = occ.iter().zip(&probs).map(|(&m, p)| p[m]).product();
            out.push((occ, w));
        }
        Ok(out)
    }

    /// Thermal average over spectator configurations of zigzag-only scans.
    pub fn scan_fast(&self, seq: &PulseSequence, n_points: usize, dt: f64) -> Result<SignalGrid> {
        if seq.target_slot != 0 || seq.measure_slot != 0 {
            return Err(Error::Protocol("kerr fast path drives and measures the zigzag slot only".into()));
        }
        let reg = FockRegister::new(vec![self.dim_zz], vec!["zz".into()])?;
        let pulses = PulseSet::new(seq, &reg)?;
        let rho0 = thermal_state(self.nbar_zz, self.dim_zz)?.rho;
        let configs = self.spectator_configurations()?;
        let parts: Vec<SignalGrid> = configs
            .par_iter()
            .map(|(occ, _)| scan_with(&DiagonalPhase::new(&self.energies(occ), dt), &rho0, &pulses, seq, n_points, dt))
            .collect::<Result<_>>()?;
        let mut values = Array2::<C64>::zeros((n_points, n_points));
        let mut worst: f64 = 0.0;
        for ((_, w), g) in configs.iter().zip(parts) {
            values.scaled_add(C64::new(*w, 0.0), &g.values);
            worst = worst.max(g.max_imag_residual);
        }
        Ok(SignalGrid::new(dt, values, worst))
    }

    /// Full-register model and initial state; the dense oracle for `scan_fast`.
    pub fn dense(&self) -> Result<(LindbladModel, CMatrix)> {
        self.validate()?;
        let reg = self.register()?;
        let d = reg.total_dim();
        let mut h = Array2::<C64>::zeros((d, d));
        for i in 0..d {
            let occ = reg.occupations(i);
            h[[i, i]] = C64::new(self.energies(&occ[1..])[occ[0]], 0.0);
        }
        let mut factors = vec![thermal_state(self.nbar_zz, self.dim_zz)?.rho];
        for (&nb, &dim) in self.spectator_nbar.iter().zip(&self.spectator_dims) {
            factors.push(thermal_state(nb, dim)?.rho);
        }
        let rho0 = product_operator(&factors, &reg)?;
        Ok((LindbladModel::new(h, Vec::new(), reg)?, rho0))
    }
}

/// Zigzag and stretch modes coupled by `Ω_T (a_zz² a_str† + h.c.)` with heating.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceModel {
    /// rad/s
    pub omega_t: f64,
    /// `[zz, stretch]`
    pub dims: [usize; 2],
    pub nbar: [f64; 2],
    /// Heating rates ṅ, quanta per second.
    pub heating: [f64; 2],
    /// `ω_str − 2ω_zz`, rad/s; zero on resonance.
    pub stretch_detuning: f64,
}

impl ResonanceModel {
    pub fn register(&self) -> Result<FockRegister> {
        FockRegister::new(self.dims.to_vec(), vec!["zz".into(), "str".into()])
    }

    pub fn build(&self) -> Result<(LindbladModel, CMatrix)> {
        if !(self.omega_t.is_finite() && self.stretch_detuning.is_finite()) {
            return Err(Error::Protocol("resonance model: non-finite frequency".into()));
        }
        let reg = self.register()?;
        let mut h = resonant_hamiltonian(self.omega_t, self.dims[0], self.dims[1]).mapv(|x| C64::new(x, 0.0));
        let n_str = embed(&mode_operators(self.dims[1])?.n, 1, &reg)?;
        h.scaled_add(C64::new(self.stretch_detuning, 0.0), &n_str);
        let mut collapse = Vec::new();
        for slot in 0..2 {
            collapse.extend(heating_dissipator(slot, self.heating[slot], &reg)?);
        }
        let rho0 = product_operator(&[thermal_state(self.nbar[0], self.dims[0])?.rho, thermal_state(self.nbar[1], self.dims[1])?.rho], &reg)?;
        Ok((LindbladModel::new(h, collapse, reg)?, rho0))
    }
}

/// Build the propagator for `model` and scan it.
pub fn scan(model: &LindbladModel, rho0: &CMatrix, seq: &PulseSequence, t_max: f64, dt: f64, memory_budget: usize) -> Result<SignalGrid> {
    let n = grid_points(t_max, dt)?;
    let prop = build_propagator(model, dt, memory_budget)?;
    let pulses = PulseSet::new(seq, &model.register)?;
    scan_with(&prop, rho0, &pulses, seq, n, dt)
}
