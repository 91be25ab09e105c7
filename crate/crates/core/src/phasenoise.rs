//! Laser phase drift as a Wiener process and the resulting loss of
//! phase-cycled signal.
//!
//! Pulse timing: pulse 1 at 0, pulses 2 and 3 at `t₁`, pulse 4 at `t₁ + t₃`.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `4π²/10` rad²/s: one 2π standard deviation after ten seconds.
pub fn reference_diffusion() -> f64 {
    4.0 * PI * PI / 10.0
}

/// Above this `c·(t₁+t₃)` the second-order expansion is flagged.
pub const SMALL_FLUCTUATION_LIMIT: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossEstimate {
    /// Fractional signal loss.
    pub loss: f64,
    pub warning: Option<String>,
}

/// `Δs = ½c[(p₂+p₃+p₄)² t₁ + p₄² t₃]`
pub fn contrast_loss(q: [i32; 3], t1: f64, t3: f64, c: f64) -> Result<LossEstimate> {
    if !(c >= 0.0 && t1 >= 0.0 && t3 >= 0.0 && c.is_finite() && t1.is_finite() && t3.is_finite()) {
        return Err(Error::PhaseNoise(format!("invalid loss inputs c = {c}, t1 = {t1}, t3 = {t3}")));
    }
    let total = (q[0] + q[1] + q[2]) as f64;
    let p4 = q[2] as f64;
    let loss = 0.5 * c * (total * total * t1 + p4 * p4 * t3);
    let x = c * (t1 + t3);
    let warning = (x > SMALL_FLUCTUATION_LIMIT).then(|| format!("c·(t1+t3) = {x:.3} is not small; second-order loss estimate unreliable"));
    Ok(LossEstimate { loss, warning })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerPhaseModel {
    /// rad²/s
    pub diffusion: f64,
    pub seed: u64,
}

impl WienerPhaseModel {
    pub fn new(diffusion: f64, seed: u64) -> Result<Self> {
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(Error::PhaseNoise(format!("diffusion constant must be >= 0, got {diffusion}")));
        }
        Ok(Self { diffusion, seed })
    }

    /// Independent stream for path `k`.
    fn rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }

    fn path(&self, k: usize, times: &[f64]) -> Vec<f64> {
        let mut rng = self.rng(k);
        let mut x = 0.0;
        let mut t_prev = 0.0;
        times
            .iter()
            .map(|&t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += (self.diffusion * (t - t_prev)).sqrt() * z;
                t_prev = t;
                x
            })
            .collect()
    }

    /// `X(t)` with `X(0) = 0` sampled at `times`; rows are paths.
    pub fn sample_paths(&self, times: &[f64], n_paths: usize) -> Result<Array2<f64>> {
        check_times(times)?;
        let rows: Vec<Vec<f64>> = (0..n_paths).into_par_iter().map(|k| self.path(k, times)).collect();
        Ok(Array2::from_shape_vec((n_paths, times.len()), rows.concat()).expect("path shape"))
    }

    /// Monte Carlo `⟨cos Σ_k p_k X(τ_k)⟩` and its standard error.
    pub fn attenuation(&self, q: [i32; 3], t1: f64, t3: f64, n_paths: usize) -> Result<(f64, f64)> {
        if n_paths < 2 {
            return Err(Error::PhaseNoise("need at least two paths".into()));
        }
        let times = [t1, t1 + t3];
        check_times(&times)?;
        let samples: Vec<f64> = (0..n_paths)
            .into_par_iter()
            .map(|k| {
                let x = self.path(k, &times);
                ((q[0] + q[1]) as f64 * x[0] + q[2] as f64 * x[1]).cos()
            })
            .collect();
        let n = n_paths as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok((mean, (var / n).sqrt()))
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::PhaseNoise("sample times must be finite, non-negative and ascending".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub signature: [i32; 3],
    pub loss: f64,
}

/// The pathways of the four-displacement loss table.
pub const TABLE_SIGNATURES: [[i32; 3]; 5] = [[1, -1, -1], [1, -2, -1], [1, -1, -2], [2, -2, 1], [-1, -1, -1]];

pub fn loss_table(t1: f64, t3: f64, c: f64) -> Result<Vec<LossRow>> {
    TABLE_SIGNATURES.iter().map(|&q| Ok(LossRow { signature: q, loss: contrast_loss(q, t1, t3, c)?.loss })).collect()
}
