//! 2D spectra of phase-cycled signal grids, 1D projections and peak analysis.
//!
//! Standard forward DFT `Σ_k s_k e^{−2πi jk/n}`: a tone `e^{−iω₀t}` sits at
//! `−ω₀`. Axes are fftshifted and the rotating-frame carrier is reattached as
//! a pure relabelling.

use std::f64::consts::{PI, TAU};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::SignalGrid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    /// Quarter-period cosine falling from 1 at `t = 0` to 0 at `t_max`.
    Cosine,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FftOptions {
    pub window: Window,
    pub zero_pad: usize,
    /// Added to both frequency axes, rad/s.
    pub carrier_offset: f64,
    /// Zero the carrier bin neighbourhood after the transform.
    pub notch: bool,
}

impl Default for FftOptions {
    fn default() -> Self {
        Self { window: Window::None, zero_pad: 1, carrier_offset: 0.0, notch: false }
    }
}

#[derive(Clone, Debug)]
pub struct Spectrum2D {
    /// rad/s, carrier offset included
    pub omega1: Vec<f64>,
    pub omega3: Vec<f64>,
    pub values: Array2<C64>,
    pub magnitude: Array2<f64>,
    /// rad/s
    pub bin_width: f64,
    pub carrier_offset: f64,
}

#[derive(Clone, Debug)]
pub struct Spectrum1D {
    pub omega: Vec<f64>,
    pub values: Vec<C64>,
    pub magnitude: Vec<f64>,
    pub bin_width: f64,
}

/// Shifted angular-frequency axis of an `n`-point transform.
pub fn frequency_axis(n: usize, dt: f64, offset: f64) -> Vec<f64> {
    let half = (n / 2) as f64;
    (0..n).map(|k| TAU * (k as f64 - half) / (n as f64 * dt) + offset).collect()
}

fn window_weights(window: Window, n: usize) -> Vec<f64> {
    match window {
        Window::None => vec![1.0; n],
        Window::Cosine if n == 1 => vec![1.0],
        Window::Cosine => (0..n).map(|k| (0.5 * PI * k as f64 / (n - 1) as f64).cos()).collect(),
    }
}

fn check_grid(grid: &SignalGrid, zero_pad: usize) -> Result<()> {
    if grid.values.is_empty() {
        return Err(Error::Spectrum("empty signal grid".into()));
    }
    if !(grid.dt > 0.0 && grid.dt.is_finite()) {
        return Err(Error::Spectrum(format!("grid step must be positive, got {}", grid.dt)));
    }
    if zero_pad == 0 {
        return Err(Error::Spectrum("zero-padding factor must be >= 1".into()));
    }
    if grid.values.iter().any(|z| !z.is_finite()) {
        return Err(Error::Spectrum("signal grid has non-finite values".into()));
    }
    Ok(())
}

fn fft_shifted(data: &mut [C64], planner: &mut FftPlanner<f64>) {
    let n = data.len();
    planner.plan_fft_forward(n).process(data);
    data.rotate_right(n / 2);
}

pub fn fft2(grid: &SignalGrid, options: &FftOptions) -> Result<Spectrum2D> {
    check_grid(grid, options.zero_pad)?;
    let (g1, g3) = grid.values.dim();
    let (n1, n3) = (g1 * options.zero_pad, g3 * options.zero_pad);
    let (w1, w3) = (window_weights(options.window, g1), window_weights(options.window, g3));
    let mut buf = Array2::<C64>::zeros((n1, n3));
    for ((i, j), v) in grid.values.indexed_iter() {
        buf[[i, j]] = v * (w1[i] * w3[j]);
    }
    let mut planner = FftPlanner::new();
    for mut row in buf.rows_mut() {
        let mut line = row.to_vec();
        fft_shifted(&mut line, &mut planner);
        row.assign(&Array1::from(line));
    }
    for mut col in buf.columns_mut() {
        let mut line = col.to_vec();
        fft_shifted(&mut line, &mut planner);
        col.assign(&Array1::from(line));
    }
    if options.notch {
        let (c1, c3) = (n1 / 2, n3 / 2);
        let r = options.zero_pad as isize;
        for di in -r..=r {
            for dj in -r..=r {
                let i = (c1 as isize + di).rem_euclid(n1 as isize) as usize;
                let j = (c3 as isize + dj).rem_euclid(n3 as isize) as usize;
                buf[[i, j]] = C64::new(0.0, 0.0);
            }
        }
    }
    let magnitude = buf.mapv(|z| z.norm());
    Ok(Spectrum2D {
        omega1: frequency_axis(n1, grid.dt, options.carrier_offset),
        omega3: frequency_axis(n3, grid.dt, options.carrier_offset),
        values: buf,
        magnitude,
        bin_width: TAU / (n1 as f64 * grid.dt),
        carrier_offset: options.carrier_offset,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Spectrum along ω₁ of the `t₃ = 0` slice.
    Omega1,
    /// Spectrum along ω₃ of the `t₁ = 0` slice.
    Omega3,
}

/// Transform of the `t₃ = 0` (or `t₁ = 0`) slice: what a 1D experiment sees.
pub fn project_1d(grid: &SignalGrid, axis: Axis, options: &FftOptions) -> Result<Spectrum1D> {
    check_grid(grid, options.zero_pad)?;
    let slice: Vec<C64> = match axis {
        Axis::Omega1 => grid.values.column(0).to_vec(),
        Axis::Omega3 => grid.values.row(0).to_vec(),
    };
    let g = slice.len();
    let n = g * options.zero_pad;
    let w = window_weights(options.window, g);
    let mut line = vec![C64::new(0.0, 0.0); n];
    for (k, v) in slice.iter().enumerate() {
        line[k] = v * w[k];
    }
    fft_shifted(&mut line, &mut FftPlanner::new());
    Ok(Spectrum1D {
        omega: frequency_axis(n, grid.dt, options.carrier_offset),
        magnitude: line.iter().map(|z| z.norm()).collect(),
        values: line,
        bin_width: TAU / (n as f64 * grid.dt),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// rad/s, centroid-refined
    pub omega1: f64,
    pub omega3: f64,
    pub magnitude: f64,
    /// Grid bin of the maximum.
    pub bin: (usize, usize),
    pub label: String,
}

/// Local maxima of `|S|` over the circular 3×3 neighbourhood above
/// `threshold·max`, sorted by magnitude.
pub fn find_peaks(spec: &Spectrum2D, threshold: f64) -> Result<Vec<Peak>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Spectrum(format!("peak threshold must lie in (0, 1), got {threshold}")));
    }
    let m = &spec.magnitude;
    let (n1, n3) = m.dim();
    let max = m.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(Vec::new());
    }
    let at = |i: isize, j: isize| m[[i.rem_euclid(n1 as isize) as usize, j.rem_euclid(n3 as isize) as usize]];
    let mut peaks = Vec::new();
    for ((i, j), &v) in m.indexed_iter() {
        if v <= threshold * max {
            continue;
        }
        let (ii, jj) = (i as isize, j as isize);
        let mut is_max = true;
        let (mut w, mut d1, mut d3) = (0.0, 0.0, 0.0);
        for di in -1..=1 {
            for dj in -1..=1 {
                let u = at(ii + di, jj + dj);
                if (di, dj) != (0, 0) && (u > v || (u == v && (di, dj) < (0, 0))) {
                    is_max = false;
                }
                w += u;
                d1 += u * di as f64;
                d3 += u * dj as f64;
            }
        }
        if !is_max {
            continue;
        }
        let step3 = TAU / (n3 as f64) * (spec.bin_width * n1 as f64 / TAU);
        let omega1 = spec.omega1[i] + spec.bin_width * d1 / w;
        let omega3 = spec.omega3[j] + step3 * d3 / w;
        let on_diagonal = (omega1 - omega3).abs() <= spec.bin_width.max(step3);
        peaks.push(Peak { omega1, omega3, magnitude: v, bin: (i, j), label: if on_diagonal { "diagonal".into() } else { "cross".into() } });
    }
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.bin.cmp(&b.bin)));
    Ok(peaks)
}

/// Index pairs of peaks mirrored through `center` within `tol` on both axes.
pub fn reflection_pairs(peaks: &[Peak], center: (f64, f64), tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..peaks.len() {
        for b in a + 1..peaks.len() {
            let s1 = peaks[a].omega1 + peaks[b].omega1 - 2.0 * center.0;
            let s3 = peaks[a].omega3 + peaks[b].omega3 - 2.0 * center.1;
            if s1.abs() <= tol && s3.abs() <= tol {
                out.push((a, b));
            }
        }
    }
    out
}

/// Nearest bin to `(ω₁, ω₃)`.
pub fn nearest_bin(spec: &Spectrum2D, omega1: f64, omega3: f64) -> (usize, usize) {
    let near = |axis: &[f64], w: f64| axis.iter().enumerate().min_by(|a, b| (a.1 - w).abs().total_cmp(&(b.1 - w).abs())).map(|(k, _)| k).unwrap_or(0);
    (near(&spec.omega1, omega1), near(&spec.omega3, omega3))
}

/// Full widths at half maximum along ω₁ and ω₃ of the peak nearest
/// `(ω₁, ω₃)`, linearly interpolated between bins. Best used on a
/// zero-padded spectrum.
pub fn peak_widths(spec: &Spectrum2D, omega1: f64, omega3: f64) -> Result<(f64, f64)> {
    let m = &spec.magnitude;
    let (n1, n3) = m.dim();
    let (mut i, mut j) = nearest_bin(spec, omega1, omega3);
    // hill-climb to the local maximum
    for _ in 0..n1.max(n3) {
        let mut best = (i, j);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a < 0 || b < 0 || a >= n1 as isize || b >= n3 as isize {
                    continue;
                }
                if m[[a as usize, b as usize]] > m[best] {
                    best = (a as usize, b as usize);
                }
            }
        }
        if best == (i, j) {
            break;
        }
        (i, j) = best;
    }
    let col: Vec<f64> = m.column(j).to_vec();
    let row: Vec<f64> = m.row(i).to_vec();
    let w1 = fwhm(&col, i).ok_or_else(|| Error::Spectrum(format!("peak at bin ({i}, {j}) has no half-maximum crossing along omega1")))?;
    let w3 = fwhm(&row, j).ok_or_else(|| Error::Spectrum(format!("peak at bin ({i}, {j}) has no half-maximum crossing along omega3")))?;
    Ok((w1 * spec.bin_width, w3 * spec.bin_width))
}

/// Width in bins of the half-maximum band around `c`.
fn fwhm(line: &[f64], c: usize) -> Option<f64> {
    let h = line[c] / 2.0;
    let mut l = c;
    while line[l] > h {
        l = l.checked_sub(1)?;
    }
    let mut r = c;
    while line[r] > h {
        r += 1;
        if r >= line.len() {
            return None;
        }
    }
    let left = l as f64 + (h - line[l]) / (line[l + 1] - line[l]);
    let right = (r - 1) as f64 + (line[r - 1] - h) / (line[r - 1] - line[r]);
    Some(right - left)
}

/// Spectral power summed along each circular diagonal `j − i = k`,
/// normalised to its maximum; index `k` runs over `−n/2 … n/2 − 1`.
pub fn diagonal_offset_profile(spec: &Spectrum2D) -> Result<Vec<(isize, f64)>> {
    let (n1, n3) = spec.magnitude.dim();
    if n1 != n3 {
        return Err(Error::Spectrum(format!("offset profile needs a square spectrum, got {n1}x{n3}")));
    }
    let n = n1 as isize;
    let mut acc = vec![0.0; n1];
    for ((i, j), v) in spec.magnitude.indexed_iter() {
        acc[(j as isize - i as isize).rem_euclid(n) as usize] += v * v;
    }
    let max = acc.iter().cloned().fold(0.0, f64::max);
    let mut out: Vec<(isize, f64)> = acc
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let k = k as isize;
            (if k >= n / 2 + n % 2 { k - n } else { k }, if max > 0.0 { p / max } else { 0.0 })
        })
        .collect();
    out.sort_by_key(|(k, _)| *k);
    Ok(out)
}

/// Offsets `j − i` (in bins) of every bin above `threshold·max`.
pub fn above_threshold_offsets(spec: &Spectrum2D, threshold: f64) -> Vec<isize> {
    let max = spec.magnitude.iter().cloned().fold(0.0, f64::max);
    let n = spec.magnitude.nrows() as isize;
    spec.magnitude
        .indexed_iter()
        .filter(|(_, &v)| v > threshold * max)
        .map(|((i, j), _)| {
            let d = (j as isize - i as isize).rem_euclid(n);
            if d >= n / 2 + n % 2 {
                d - n
            } else {
                d
            }
        })
        .collect()
}

/// Contiguous index ranges where `values > threshold·max`.
pub fn bands_above(values: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut start = None;
    for (k, &v) in values.iter().enumerate() {
        match (v > threshold * max, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, values.len() - 1));
    }
    out
}
