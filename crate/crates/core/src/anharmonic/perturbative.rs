//! Off-resonant third-order terms treated in second-order perturbation theory.
//!
//! The cubic coupling between x and z modes,
//! `3η ω_z Σ D3[n,m,p] (γ_n γ_m λ_p)^{-1/4} (a_n+a_n†)(a_m+a_m†)(c_p+c_p†)`,
//! shifts every Fock level by `Σ |⟨n'|H|n⟩|²/(E_n − E_n')`. The shifts are a
//! quadratic polynomial in the occupations; its coefficients are the Kerr-form
//! parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{regime, KerrParams, ModeId, ModeTensors};
use crate::crystal::Crystal;
use crate::error::{Error, Result};

/// Which cubic x-x-z terms enter the perturbative sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdOrderTerms {
    /// Terms in which at least one x operator acts on the zigzag mode.
    #[default]
    ZigzagOnly,
    /// Every non-COM x-x-z term.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThirdOrderOptions {
    pub terms: ThirdOrderTerms,
    /// Highest occupation per mode on the validation grid.
    pub grid_max: usize,
    /// Smallest allowed energy denominator, in units of `ω_z`.
    pub denominator_guard: f64,
}

impl Default for ThirdOrderOptions {
    fn default() -> Self {
        Self { terms: ThirdOrderTerms::ZigzagOnly, grid_max: 3, denominator_guard: 1e-3 }
    }
}

type Ladder = [(usize, bool); 3];

struct CubicModel {
    slots: Vec<ModeId>,
    freq: Vec<f64>,
    terms: Vec<(Ladder, f64)>,
    guard: f64,
}

impl CubicModel {
    fn energy(&self, occ: &[usize]) -> f64 {
        occ.iter().zip(&self.freq).map(|(&n, w)| n as f64 * w).sum()
    }

    fn shift(&self, occ: &[usize]) -> Result<f64> {
        let mut amps: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        'terms: for (ops, c) in &self.terms {
            let mut state = occ.to_vec();
            let mut amp = *c;
            for &(slot, raise) in ops.iter().rev() {
                let k = state[slot];
                if raise {
                    amp *= ((k + 1) as f64).sqrt();
                    state[slot] = k + 1;
                } else {
                    if k == 0 {
                        continue 'terms;
                    }
                    amp *= (k as f64).sqrt();
                    state[slot] = k - 1;
                }
            }
            *amps.entry(state).or_insert(0.0) += amp;
        }
        let e0 = self.energy(occ);
        let mut total = 0.0;
        for (out, v) in amps {
            if out == occ || v == 0.0 {
                continue;
            }
            let denom = e0 - self.energy(&out);
            if denom.abs() <= self.guard {
                return Err(Error::Anharmonic(format!(
                    "near-resonant third-order coupling between {occ:?} and {out:?} (energy gap {denom:.4e} rad/s); \
                     use the resonant treatment instead of perturbation theory"
                )));
            }
            total += v * v / denom;
        }
        Ok(total)
    }
}

fn monomials(k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    out.extend((0..k).map(|i| vec![i]));
    for i in 0..k {
        for j in i..k {
            out.push(vec![i, j]);
        }
    }
    out
}

fn eval_monomial(mon: &[usize], occ: &[usize]) -> f64 {
    mon.iter().map(|&i| occ[i] as f64).product()
}

/// Occupation vectors over `k` modes with every entry `<= max` and total `<= total`.
fn occupations(k: usize, max: usize, total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    loop {
        if cur.iter().sum::<usize>() <= total {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == k {
                return out;
            }
            if cur[i] < max {
                cur[i] += 1;
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

pub fn perturbative_third_order(crystal: &Crystal, tensors: &ModeTensors, options: &ThirdOrderOptions) -> Result<KerrParams> {
    let (eta, zz) = regime(crystal)?;
    let modes = &crystal.modes;
    let n = modes.n_modes();
    let wz = crystal.trap.omega_z;

    let mut slots: Vec<ModeId> = (1..n).map(ModeId::x).collect();
    slots.extend((1..n).map(ModeId::z));
    let x_slot = |m: usize| m - 1;
    let z_slot = |p: usize| n - 2 + p;
    let freq: Vec<f64> = slots.iter().map(|s| s.frequency(modes, wz)).collect();

    let mut combined: BTreeMap<Ladder, f64> = BTreeMap::new();
    for a in 1..n {
        for b in 1..n {
            if options.terms == ThirdOrderTerms::ZigzagOnly && a != zz && b != zz {
                continue;
            }
            for p in 1..n {
                let c = 3.0 * eta * wz * tensors.d3[[a, b, p]] / (modes.gamma_x[a] * modes.gamma_x[b] * modes.lambda_z[p]).powf(0.25);
                if c == 0.0 {
                    continue;
                }
                for signs in 0..8u8 {
                    let ops = [(x_slot(a), signs & 1 != 0), (x_slot(b), signs & 2 != 0), (z_slot(p), signs & 4 != 0)];
                    *combined.entry(ops).or_insert(0.0) += c;
                }
            }
        }
    }
    let model = CubicModel { slots, freq, terms: combined.into_iter().collect(), guard: options.denominator_guard * wz };

    let k = model.slots.len();
    let mons = monomials(k);
    let fit_points = occupations(k, 2, 2);
    debug_assert_eq!(fit_points.len(), mons.len());
    let size = mons.len();
    let a = nalgebra::DMatrix::from_fn(size, size, |r, c| eval_monomial(&mons[c], &fit_points[r]));
    let mut rhs = nalgebra::DVector::zeros(size);
    for (r, occ) in fit_points.iter().enumerate() {
        rhs[r] = model.shift(occ)?;
    }
    let coef = a.lu().solve(&rhs).ok_or_else(|| Error::Anharmonic("singular occupation fit".into()))?;

    let grid_max = options.grid_max.max(2);
    let validation = if (grid_max + 1).pow(k as u32) <= 4096 { occupations(k, grid_max, usize::MAX) } else { occupations(k, grid_max, grid_max) };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for occ in &validation {
        let exact = model.shift(occ)?;
        let fit: f64 = mons.iter().zip(coef.iter()).map(|(m, c)| c * eval_monomial(m, occ)).sum();
        worst = worst.max((exact - fit).abs());
        scale = scale.max(exact.abs());
    }
    if worst > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Anharmonic(format!("third-order shifts are not quadratic in the occupations (residual {:.3e} of {:.3e})", worst, scale)));
    }

    let linear = |slot: usize| coef[1 + slot];
    let quad = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let pos = mons.iter().position(|m| m.as_slice() == [i, j]).expect("monomial present");
        coef[pos]
    };
    let zz_slot = x_slot(zz);
    let mut params = KerrParams { omega_si: 2.0 * quad(zz_slot, zz_slot), delta_omega_zz: linear(zz_slot), ..KerrParams::default() };
    for (slot, id) in model.slots.iter().enumerate() {
        if slot != zz_slot {
            params.delta_omega.insert(*id, linear(slot));
            params.omega_d.insert(*id, quad(zz_slot, slot));
        }
    }
    // the cubic terms couple x and z only
    for m in 1..n {
        params.delta_omega.insert(ModeId::y(m), 0.0);
        params.omega_d.insert(ModeId::y(m), 0.0);
    }
    Ok(params)
}
