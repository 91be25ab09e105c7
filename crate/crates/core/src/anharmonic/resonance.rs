//! Resonant exchange `Ω_T (a_zz² c_str† + a_zz†² c_str)` when two zigzag
//! phonons match one stretch phonon.
//!
//! The exchange conserves `K = n_zz + 2 n_str`, so it splits into small blocks
//! (manifolds) that can be diagonalized independently.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{regime, ModeTensors};
use crate::crystal::{Crystal, NormalModes};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// `α_x` at which `2ω_zz = ω_str` for three ions.
pub const RESONANT_ANISOTROPY: f64 = 20.0 / 63.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantCoupling {
    /// rad/s
    pub omega_t: f64,
    /// `2ω_zz − ω_str`, rad/s
    pub detuning: f64,
    /// Anisotropy at which the resonance is exact for this chain.
    pub resonant_alpha_x: f64,
    pub warning: Option<String>,
}

/// `α_x` solving `4 γ_N^x = λ_1^z`.
pub fn resonant_anisotropy(modes: &NormalModes) -> f64 {
    let zz = modes.zigzag();
    1.0 / (modes.lambda_z[1] / 4.0 + modes.lambda_z[zz] / 2.0 - 0.5)
}

/// `Ω_T = 3η ω_z D3[zz,zz,str] / (γ_zz² λ_str)^{1/4}`, with the stretch mode
/// being axial mode 1. A warning is attached when `α_x` is further than
/// `alpha_window` from the resonant value.
pub fn resonant_coupling(crystal: &Crystal, tensors: &ModeTensors, alpha_window: f64) -> Result<ResonantCoupling> {
    let (eta, zz) = regime(crystal)?;
    let modes = &crystal.modes;
    let wz = crystal.trap.omega_z;
    let gzz = modes.gamma_x[zz];
    let lstr = modes.lambda_z[1];
    let omega_t = 3.0 * eta * wz * tensors.d3[[zz, zz, 1]] / (gzz * gzz * lstr).powf(0.25);
    let detuning = 2.0 * gzz.sqrt() * wz - lstr.sqrt() * wz;
    let target = resonant_anisotropy(modes);
    let warning = ((modes.alpha_x - target).abs() > alpha_window).then(|| {
        format!(
            "alpha_x = {:.6} is outside the window {:.3e} around the resonant value {:.6}; detuning 2*w_zz - w_str = {:.4e} rad/s",
            modes.alpha_x, alpha_window, target, detuning
        )
    });
    Ok(ResonantCoupling { omega_t, detuning, resonant_alpha_x: target, warning })
}

/// One block of constant `K = n_zz + 2 n_str`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    pub charge: usize,
    /// `(n_str, n_zz)` pairs, highest stretch occupation first.
    pub basis: Vec<(usize, usize)>,
    /// Ascending, rad/s.
    pub eigenvalues: Vec<f64>,
}

fn manifold(omega_t: f64, charge: usize, max_zz: usize, max_str: usize) -> Option<Manifold> {
    let basis: Vec<(usize, usize)> = (0..=charge / 2).rev().map(|s| (s, charge - 2 * s)).filter(|&(s, z)| s <= max_str && z <= max_zz).collect();
    if basis.is_empty() {
        return None;
    }
    let d = basis.len();
    let mut h = Array2::zeros((d, d));
    for (i, &(s, z)) in basis.iter().enumerate() {
        if let Some(j) = basis.iter().position(|&b| b == (s + 1, z.wrapping_sub(2))) {
            let v = omega_t * ((z * (z - 1)) as f64).sqrt() * ((s + 1) as f64).sqrt();
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    let (eig, _) = symmetric_eigen(&h);
    Some(Manifold { charge, basis, eigenvalues: eig.to_vec() })
}

/// Manifolds `K = 0..=max_quanta` of the untruncated exchange Hamiltonian.
pub fn resonant_manifolds(omega_t: f64, max_quanta: usize) -> Result<Vec<Manifold>> {
    if max_quanta < 2 {
        return Err(Error::Anharmonic(format!("resonant_manifolds: max_quanta must be >= 2, got {max_quanta}")));
    }
    Ok((0..=max_quanta).filter_map(|k| manifold(omega_t, k, usize::MAX, usize::MAX)).collect())
}

/// All manifolds of the exchange Hamiltonian restricted to `dim_zz × dim_str`
/// Fock states; their eigenvalues together are the full truncated spectrum.
pub fn truncated_manifolds(omega_t: f64, dim_zz: usize, dim_str: usize) -> Vec<Manifold> {
    let max_k = (dim_zz - 1) + 2 * (dim_str - 1);
    (0..=max_k).filter_map(|k| manifold(omega_t, k, dim_zz - 1, dim_str - 1)).collect()
}

/// Dense exchange Hamiltonian on the register `[zz, str]` (zigzag slot first).
pub fn resonant_hamiltonian(omega_t: f64, dim_zz: usize, dim_str: usize) -> Array2<f64> {
    let dim = dim_zz * dim_str;
    let mut h = Array2::zeros((dim, dim));
    for z in 2..dim_zz {
        for s in 0..dim_str - 1 {
            // a_zz² c_str† |z, s⟩ = √(z(z−1)) √(s+1) |z−2, s+1⟩
            let from = z * dim_str + s;
            let to = (z - 2) * dim_str + s + 1;
            let v = omega_t * ((z * (z - 1)) as f64).sqrt() * ((s + 1) as f64).sqrt();
            h[[to, from]] = v;
            h[[from, to]] = v;
        }
    }
    h
}
