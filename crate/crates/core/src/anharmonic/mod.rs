//! Anharmonic corrections to the normal modes near the linear-to-zigzag
//! transition: coupling tensors, Kerr-type parameters from fourth order and
//! second-order perturbation theory in the cubic terms, the resonant
//! stretch/zigzag exchange and a rotating-wave check.

mod kerr;
mod perturbative;
mod resonance;
mod rwa;
mod tensors;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use kerr::effective_kerr;
pub use perturbative::{perturbative_third_order, ThirdOrderOptions, ThirdOrderTerms};
pub use resonance::{resonant_coupling, resonant_hamiltonian, resonant_manifolds, truncated_manifolds, Manifold, ResonantCoupling, RESONANT_ANISOTROPY};
pub use rwa::{rwa_report, RwaReport, RwaTerm};
pub use tensors::{c3_tensor, c4_tensor, mode_tensors, CouplingTensor3, CouplingTensor4, ModeTensors};

use crate::crystal::{Crystal, NormalModes};
use crate::error::{Error, Result};

/// Smallest x zigzag eigenvalue for which the expansion is trusted.
pub const MIN_ZIGZAG_GAMMA: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    X,
    Y,
    Z,
}

/// A normal mode: direction plus 0-based mode index (0 is centre of mass).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeId {
    pub direction: Direction,
    pub index: usize,
}

impl ModeId {
    pub fn x(index: usize) -> Self {
        Self { direction: Direction::X, index }
    }
    pub fn y(index: usize) -> Self {
        Self { direction: Direction::Y, index }
    }
    pub fn z(index: usize) -> Self {
        Self { direction: Direction::Z, index }
    }

    /// Harmonic angular frequency of this mode.
    pub fn frequency(&self, modes: &NormalModes, omega_z: f64) -> f64 {
        match self.direction {
            Direction::X => modes.x_frequency(self.index, omega_z),
            Direction::Y => modes.y_frequency(self.index, omega_z),
            Direction::Z => modes.axial_frequency(self.index, omega_z),
        }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match self.direction {
            Direction::X => "x",
            Direction::Y => "y",
            Direction::Z => "z",
        };
        write!(f, "{d}{}", self.index)
    }
}

/// Kerr-form parameters of one expansion order (or their sum), rad/s.
///
/// The x zigzag mode carries `omega_si` (coefficient `Ω_SI/2` of
/// `a†²a²`) and `delta_omega_zz`; every other non-COM mode carries a
/// frequency shift and a cross-Kerr coupling `omega_d` to the zigzag mode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KerrParams {
    pub omega_si: f64,
    pub delta_omega_zz: f64,
    pub delta_omega: BTreeMap<ModeId, f64>,
    pub omega_d: BTreeMap<ModeId, f64>,
}

impl KerrParams {
    pub fn shift(&self, mode: ModeId) -> f64 {
        self.delta_omega.get(&mode).copied().unwrap_or(0.0)
    }

    pub fn dephasing(&self, mode: ModeId) -> f64 {
        self.omega_d.get(&mode).copied().unwrap_or(0.0)
    }
}

/// Third- and fourth-order contributions and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveParams {
    pub third: KerrParams,
    pub fourth: KerrParams,
    pub effective: KerrParams,
}

fn add_maps(a: &BTreeMap<ModeId, f64>, b: &BTreeMap<ModeId, f64>) -> BTreeMap<ModeId, f64> {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(*k).or_insert(0.0) += v;
    }
    out
}

pub fn combine_orders(third: KerrParams, fourth: KerrParams) -> EffectiveParams {
    let effective = KerrParams {
        omega_si: third.omega_si + fourth.omega_si,
        delta_omega_zz: third.delta_omega_zz + fourth.delta_omega_zz,
        delta_omega: add_maps(&third.delta_omega, &fourth.delta_omega),
        omega_d: add_maps(&third.omega_d, &fourth.omega_d),
    };
    EffectiveParams { third, fourth, effective }
}

/// One row of the parameter breakdown, rad/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub quantity: String,
    pub third: f64,
    pub fourth: f64,
    pub effective: f64,
}

impl EffectiveParams {
    /// Frequency shifts first (non-zigzag x, zigzag, y, z), then the
    /// couplings (non-zigzag x, `Ω_SI/2`, y, z).
    pub fn rows(&self, zigzag: usize) -> Vec<ParameterRow> {
        let row = |quantity: String, f: &dyn Fn(&KerrParams) -> f64| ParameterRow {
            quantity,
            third: f(&self.third),
            fourth: f(&self.fourth),
            effective: f(&self.effective),
        };
        let mut keys: Vec<ModeId> = self.effective.delta_omega.keys().copied().collect();
        for k in self.effective.omega_d.keys() {
            if !keys.contains(k) {
                keys.push(*k);
            }
        }
        keys.sort();
        let zz = ModeId::x(zigzag);
        let mut out = Vec::new();
        for k in keys.iter().filter(|k| k.direction == Direction::X) {
            out.push(row(format!("delta_omega_{k}"), &|p| p.shift(*k)));
        }
        out.push(row(format!("delta_omega_{zz}"), &|p| p.delta_omega_zz));
        for k in keys.iter().filter(|k| k.direction != Direction::X) {
            out.push(row(format!("delta_omega_{k}"), &|p| p.shift(*k)));
        }
        for k in keys.iter().filter(|k| k.direction == Direction::X) {
            out.push(row(format!("omega_d_{k}"), &|p| p.dephasing(*k)));
        }
        out.push(row("omega_si_half".into(), &|p| p.omega_si / 2.0));
        for k in keys.iter().filter(|k| k.direction != Direction::X) {
            out.push(row(format!("omega_d_{k}"), &|p| p.dephasing(*k)));
        }
        out
    }
}

/// The anharmonic expansion parameter and the zigzag index, after checking
/// that the x zigzag mode is soft but not unstable.
pub(crate) fn regime(crystal: &Crystal) -> Result<(f64, usize)> {
    let modes = &crystal.modes;
    if modes.n_modes() < 2 {
        return Err(Error::Anharmonic("at least two ions are needed for anharmonic couplings".into()));
    }
    let zz = modes.zigzag();
    let g = modes.gamma_x[zz];
    if g <= MIN_ZIGZAG_GAMMA {
        return Err(Error::Anharmonic(format!("perturbative regime violated: x zigzag eigenvalue {g:.3e} <= {MIN_ZIGZAG_GAMMA:e}")));
    }
    Ok((crystal.trap.anharmonicity(), zz))
}

/// Crystal, tensors and both expansion orders for a trap.
pub fn derive_parameters(crystal: &Crystal, options: &ThirdOrderOptions) -> Result<(ModeTensors, EffectiveParams)> {
    let c3 = c3_tensor(&crystal.chain);
    let c4 = c4_tensor(&crystal.chain);
    let tensors = mode_tensors(&c3, &c4, &crystal.modes.m)?;
    let fourth = effective_kerr(crystal, &tensors)?;
    let third = perturbative_third_order(crystal, &tensors, options)?;
    Ok((tensors, combine_orders(third, fourth)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(si: f64, dzz: f64, pairs: &[(ModeId, f64)]) -> KerrParams {
        KerrParams {
            omega_si: si,
            delta_omega_zz: dzz,
            delta_omega: pairs.iter().map(|(m, v)| (*m, v / 2.0)).collect(),
            omega_d: pairs.iter().copied().collect(),
        }
    }

    #[test]
    fn combine_is_elementwise_sum() {
        let a = params(1.0, 2.0, &[(ModeId::y(1), 3.0)]);
        let b = params(10.0, 20.0, &[(ModeId::y(1), 30.0), (ModeId::z(2), 5.0)]);
        let e = combine_orders(a.clone(), b.clone());
        assert_eq!(e.effective.omega_si, 11.0);
        assert_eq!(e.effective.delta_omega_zz, 22.0);
        assert_eq!(e.effective.dephasing(ModeId::y(1)), 33.0);
        assert_eq!(e.effective.dephasing(ModeId::z(2)), 5.0);
        assert_eq!(e.third, a);
        assert_eq!(e.fourth, b);
    }

    #[test]
    fn labels() {
        assert_eq!(ModeId::x(2).to_string(), "x2");
        assert_eq!(ModeId::z(0).to_string(), "z0");
    }
}
