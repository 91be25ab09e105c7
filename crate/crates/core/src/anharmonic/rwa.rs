//! Bookkeeping for the rotating-wave approximation of the quartic x terms.
//!
//! Each ordered mode quartet `(n,m,p,q)` expands into 16 ladder products. In
//! the interaction picture a product rotates at `Σ_k s_k ω_k` where `s_k` is
//! +1 for a creation and −1 for an annihilation operator. Products whose net
//! ladder count vanishes for every mode are secular and kept; the others can
//! be dropped when `|c/ω| ≪ 1`.

use serde::{Deserialize, Serialize};

use super::{regime, ModeTensors};
use crate::crystal::Crystal;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwaTerm {
    /// x mode indices of the four factors, left to right.
    pub modes: [usize; 4],
    /// `true` for a creation operator.
    pub creation: [bool; 4],
    /// rad/s
    pub coefficient: f64,
    /// rad/s; exactly 0 for secular terms.
    pub frequency: f64,
    pub secular: bool,
    /// `|c/ω|` for non-secular terms.
    pub ratio: Option<f64>,
}

impl RwaTerm {
    pub fn id(&self) -> String {
        self.modes.iter().zip(self.creation).map(|(m, c)| format!("x{m}{}", if c { "+" } else { "-" })).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RwaReport {
    pub terms: Vec<RwaTerm>,
    pub max_ratio: f64,
    pub worst_term: Option<String>,
}

pub fn rwa_report(crystal: &Crystal, tensors: &ModeTensors) -> Result<RwaReport> {
    let (eta, _) = regime(crystal)?;
    let modes = &crystal.modes;
    let wz = crystal.trap.omega_z;
    let n = modes.n_modes();
    let w: Vec<f64> = (0..n).map(|k| modes.x_frequency(k, wz)).collect();
    let mut terms = Vec::new();
    let mut max_ratio: f64 = 0.0;
    let mut worst_term = None;
    for a in 1..n {
        for b in 1..n {
            for c in 1..n {
                for d in 1..n {
                    let quartet = [a, b, c, d];
                    let g: f64 = quartet.iter().map(|&k| modes.gamma_x[k]).product();
                    let coefficient = 3.0 * eta * eta * wz * tensors.d4[[a, b, c, d]] / g.powf(0.25);
                    for signs in 0..16u8 {
                        let creation = [signs & 1 != 0, signs & 2 != 0, signs & 4 != 0, signs & 8 != 0];
                        let mut net = vec![0i32; n];
                        for (&k, &up) in quartet.iter().zip(&creation) {
                            net[k] += if up { 1 } else { -1 };
                        }
                        let secular = net.iter().all(|&v| v == 0);
                        let frequency = if secular { 0.0 } else { net.iter().zip(&w).map(|(&v, wk)| v as f64 * wk).sum() };
                        let ratio = (!secular).then(|| (coefficient / frequency).abs());
                        let term = RwaTerm { modes: quartet, creation, coefficient, frequency, secular, ratio };
                        if let Some(r) = ratio {
                            if r > max_ratio {
                                max_ratio = r;
                                worst_term = Some(term.id());
                            }
                        }
                        terms.push(term);
                    }
                }
            }
        }
    }
    Ok(RwaReport { terms, max_ratio, worst_term })
}
