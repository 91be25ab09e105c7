//! Linear ion chains in a harmonic trap: equilibrium positions, Hessians of
//! the trap-plus-Coulomb potential and the resulting normal modes.
//!
//! Everything is expressed in the dimensionless units where lengths are
//! measured in `l_z` and energies in `m ω_z² l_z²`, so the axial potential is
//! `½ Σ u_i² + ½ Σ_{i≠j} 1/|u_i − u_j|`.
//!
//! Mode index 0 is the centre-of-mass mode, index `N − 1` the mode in which
//! neighbouring ions move in counterphase (the zigzag mode in the radial
//! directions).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::constants::{hz_to_rad, CA40_ION_MASS, ELEMENTARY_CHARGE, HBAR, VACUUM_PERMITTIVITY};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Physical trap parameters. Frequencies are angular (rad/s), mass in kg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    pub n_ions: usize,
    pub mass: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
}

impl TrapConfig {
    pub fn new(n_ions: usize, mass: f64, omega_x: f64, omega_y: f64, omega_z: f64) -> Result<Self> {
        let t = Self { n_ions, mass, omega_x, omega_y, omega_z };
        t.validate()?;
        Ok(t)
    }

    /// ⁴⁰Ca⁺ ions with trap frequencies given in Hz.
    pub fn calcium(n_ions: usize, fx: f64, fy: f64, fz: f64) -> Result<Self> {
        Self::new(n_ions, CA40_ION_MASS, hz_to_rad(fx), hz_to_rad(fy), hz_to_rad(fz))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions == 0 {
            return Err(Error::Crystal("n_ions must be at least 1".into()));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::Crystal(format!("mass must be positive, got {}", self.mass)));
        }
        for (name, w) in [("omega_x", self.omega_x), ("omega_y", self.omega_y), ("omega_z", self.omega_z)] {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Crystal(format!("{name} must be positive, got {w}")));
            }
        }
        Ok(())
    }

    /// `(ω_z/ω_x)²`
    pub fn alpha_x(&self) -> f64 {
        (self.omega_z / self.omega_x).powi(2)
    }

    /// `(ω_z/ω_y)²`
    pub fn alpha_y(&self) -> f64 {
        (self.omega_z / self.omega_y).powi(2)
    }

    /// Axial length scale `l_z` in meters.
    pub fn length_scale(&self) -> f64 {
        length_scale(self.mass, self.omega_z)
    }

    /// Ground-state spread of the axial centre-of-mass mode, `√(ħ/2mω_z)`.
    pub fn zero_point_spread(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_z)).sqrt()
    }

    /// Small expansion parameter `z₀/(4 l_z)` of the Coulomb nonlinearities.
    pub fn anharmonicity(&self) -> f64 {
        self.zero_point_spread() / (4.0 * self.length_scale())
    }
}

/// Dimensionless equilibrium positions, sorted ascending, plus `l_z`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumChain {
    pub u: Array1<f64>,
    pub l_z: f64,
}

impl EquilibriumChain {
    pub fn n_ions(&self) -> usize {
        self.u.len()
    }

    /// Physical positions in meters.
    pub fn positions(&self) -> Array1<f64> {
        &self.u * self.l_z
    }
}

/// Hessians of the dimensionless potential at equilibrium, per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Hessians {
    pub vz: Array2<f64>,
    pub vx: Array2<f64>,
    pub vy: Array2<f64>,
    pub alpha_x: f64,
    pub alpha_y: f64,
}

/// Harmonic normal-mode structure of a linear chain.
///
/// `lambda_z` ascends with the mode index, `gamma_x`/`gamma_y` descend.
/// Column `n` of `m` is the shared eigenvector of mode `n` in all three
/// directions.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalModes {
    pub lambda_z: Array1<f64>,
    pub gamma_x: Array1<f64>,
    pub gamma_y: Array1<f64>,
    pub m: Array2<f64>,
    pub alpha_x: f64,
    pub alpha_y: f64,
}

impl NormalModes {
    pub fn n_modes(&self) -> usize {
        self.lambda_z.len()
    }

    /// Index of the counterphase mode (`N − 1`).
    pub fn zigzag(&self) -> usize {
        self.n_modes() - 1
    }

    pub fn axial_frequency(&self, n: usize, omega_z: f64) -> f64 {
        self.lambda_z[n].sqrt() * omega_z
    }

    pub fn x_frequency(&self, n: usize, omega_z: f64) -> f64 {
        self.gamma_x[n].sqrt() * omega_z
    }

    pub fn y_frequency(&self, n: usize, omega_z: f64) -> f64 {
        self.gamma_y[n].sqrt() * omega_z
    }
}

/// `l_z = [e²/(4π ε₀ m ω_z²)]^{1/3}`.
pub fn length_scale(mass: f64, omega_z: f64) -> f64 {
    let k = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);
    (k / (mass * omega_z * omega_z)).cbrt()
}

fn gradient(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let mut g = u[i];
            for j in 0..n {
                if j != i {
                    let d = u[i] - u[j];
                    g -= d.signum() / (d * d);
                }
            }
            g
        })
        .collect()
}

fn potential(u: &[f64]) -> f64 {
    let n = u.len();
    let mut v = 0.5 * u.iter().map(|x| x * x).sum::<f64>();
    for i in 0..n {
        for j in i + 1..n {
            v += 1.0 / (u[i] - u[j]).abs();
        }
    }
    v
}

fn axial_hessian(u: &[f64]) -> Array2<f64> {
    let n = u.len();
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            1.0 + 2.0 * (0..n).filter(|&p| p != i).map(|p| 1.0 / (u[i] - u[p]).abs().powi(3)).sum::<f64>()
        } else {
            -2.0 / (u[i] - u[j]).abs().powi(3)
        }
    })
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

const EQUILIBRIUM_TOL: f64 = 1e-12;
const NEWTON_BUDGET: usize = 200;

/// Stationary point of the dimensionless axial potential for `n_ions` ions.
///
/// Damped Newton iteration started from uniformly spaced positions scaled by
/// `N^0.56`; the result is sorted and antisymmetrized about the origin.
pub fn solve_equilibrium(n_ions: usize) -> Result<Array1<f64>> {
    if n_ions == 0 {
        return Err(Error::Crystal("solve_equilibrium: n_ions must be at least 1".into()));
    }
    if n_ions == 1 {
        return Ok(Array1::zeros(1));
    }
    let n = n_ions;
    let half_width = (n as f64).powf(0.56);
    let mut u: Vec<f64> = (0..n).map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64).collect();
    let mut g = gradient(&u);
    let mut v = potential(&u);
    for _ in 0..NEWTON_BUDGET {
        if max_norm(&g) < 1e-15 {
            break;
        }
        let h = axial_hessian(&u);
        let hm = nalgebra::DMatrix::from_fn(n, n, |i, j| h[[i, j]]);
        let gv = nalgebra::DVector::from_column_slice(&g);
        let step = hm.lu().solve(&gv).ok_or_else(|| Error::Crystal("solve_equilibrium: singular Hessian".into()))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - t * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let vt = potential(&trial);
                let gt = gradient(&trial);
                if vt <= v || max_norm(&gt) < max_norm(&g) {
                    u = trial;
                    v = vt;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    // restore exact mirror symmetry; the unique minimum is antisymmetric
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (u[i] - u[n - 1 - i])).collect();
    let residual = max_norm(&gradient(&sym));
    if residual >= EQUILIBRIUM_TOL {
        return Err(Error::Crystal(format!(
            "solve_equilibrium: no convergence for N = {n} after {NEWTON_BUDGET} Newton steps, gradient residual {residual:.3e}"
        )));
    }
    Ok(Array1::from(sym))
}

/// Equilibrium chain with physical length scale attached.
pub fn equilibrium_chain(trap: &TrapConfig) -> Result<EquilibriumChain> {
    trap.validate()?;
    Ok(EquilibriumChain { u: solve_equilibrium(trap.n_ions)?, l_z: trap.length_scale() })
}

/// Axial and radial Hessians at the equilibrium positions.
pub fn hessians(chain: &EquilibriumChain, alpha_x: f64, alpha_y: f64) -> Result<Hessians> {
    if !(alpha_x > 0.0 && alpha_y > 0.0) {
        return Err(Error::Crystal(format!("anisotropies must be positive (alpha_x = {alpha_x}, alpha_y = {alpha_y})")));
    }
    let u = chain.u.as_slice().expect("contiguous positions");
    let vz = if u.len() == 1 { Array2::from_elem((1, 1), 1.0) } else { axial_hessian(u) };
    let radial = |alpha: f64| {
        let mut v = vz.mapv(|x| -0.5 * x);
        for d in v.diag_mut() {
            *d += 1.0 / alpha + 0.5;
        }
        v
    };
    Ok(Hessians { vx: radial(alpha_x), vy: radial(alpha_y), vz, alpha_x, alpha_y })
}

/// Diagonalize `V_z` once and derive the radial eigenvalues from the closed
/// form `γ_n = 1/α + ½ − λ_n/2`, which share the axial eigenvectors.
pub fn normal_modes(h: &Hessians) -> Result<NormalModes> {
    let n = h.vz.nrows();
    let (lambda_z, mut m) = symmetric_eigen(&h.vz);
    for k in 1..n {
        let gap = lambda_z[k] - lambda_z[k - 1];
        if gap <= 1e-9 * lambda_z[k].abs().max(1.0) {
            return Err(Error::Crystal(format!(
                "degenerate axial eigenvalues {} and {} (modes {} and {k}); mode ordering is ambiguous",
                lambda_z[k - 1],
                lambda_z[k],
                k - 1
            )));
        }
    }
    fix_signs(&mut m);
    let radial = |alpha: f64| lambda_z.mapv(|l| 1.0 / alpha + 0.5 - 0.5 * l);
    let gamma_x = radial(h.alpha_x);
    let gamma_y = radial(h.alpha_y);
    for (dir, g) in [("x", &gamma_x), ("y", &gamma_y)] {
        if let Some(k) = (0..n).find(|&k| g[k] <= 0.0) {
            return Err(Error::Crystal(format!(
                "chain unstable: {dir} mode {k} (zigzag mode is {}) has eigenvalue {:.6e} <= 0; the linear configuration breaks into a zigzag",
                n - 1,
                g[k]
            )));
        }
    }
    Ok(NormalModes { lambda_z, gamma_x, gamma_y, m, alpha_x: h.alpha_x, alpha_y: h.alpha_y })
}

/// Flip each eigenvector so its largest-magnitude entry is positive; ties go
/// to the lowest ion index.
fn fix_signs(m: &mut Array2<f64>) {
    for mut col in m.columns_mut() {
        let biggest = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let pivot = col.iter().copied().find(|x| x.abs() >= biggest - 1e-9).unwrap_or(0.0);
        if pivot < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Anisotropy `α_x` at which the x zigzag eigenvalue reaches zero,
/// `α_c = 2/(λ_N − 1)`.
pub fn critical_anisotropy(n_ions: usize) -> Result<f64> {
    if n_ions < 2 {
        return Err(Error::Crystal("critical_anisotropy: needs at least two ions".into()));
    }
    let u = solve_equilibrium(n_ions)?;
    let (lambda, _) = symmetric_eigen(&axial_hessian(u.as_slice().unwrap()));
    Ok(2.0 / (lambda[n_ions - 1] - 1.0))
}

/// Full harmonic description of a trap: chain, Hessians and modes.
#[derive(Clone, Debug)]
pub struct Crystal {
    pub trap: TrapConfig,
    pub chain: EquilibriumChain,
    pub hessians: Hessians,
    pub modes: NormalModes,
}

impl Crystal {
    pub fn new(trap: TrapConfig) -> Result<Self> {
        let chain = equilibrium_chain(&trap)?;
        let hessians = hessians(&chain, trap.alpha_x(), trap.alpha_y())?;
        let modes = normal_modes(&hessians)?;
        Ok(Self { trap, chain, hessians, modes })
    }

    /// Angular frequency of the x zigzag mode.
    pub fn zigzag_frequency(&self) -> f64 {
        self.modes.x_frequency(self.modes.zigzag(), self.trap.omega_z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{hz_to_rad, CA40_ION_MASS};
    use approx::assert_abs_diff_eq;

    /// Independent 1D oracle for two ions: minimize ½(a²+a²) + 1/(2a) by golden section.
    fn golden_two_ion() -> f64 {
        let f = |a: f64| a * a + 1.0 / (2.0 * a);
        let (mut lo, mut hi) = (0.1, 2.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = hi - r * (hi - lo);
            let d = lo + r * (hi - lo);
            if f(c) < f(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        0.5 * (lo + hi)
    }

    /// Bisection on the force balance of the outer ion of a symmetric 3-chain.
    fn bisect_three_ion() -> f64 {
        let g = |a: f64| a - 1.0 / (a * a) - 1.0 / (4.0 * a * a);
        let (mut lo, mut hi) = (0.5, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn single_ion_sits_at_center() {
        assert_eq!(solve_equilibrium(1).unwrap().to_vec(), vec![0.0]);
    }

    #[test]
    fn two_ions_match_force_balance() {
        let u = solve_equilibrium(2).unwrap();
        let oracle = golden_two_ion();
        assert_abs_diff_eq!(oracle, 0.25f64.cbrt(), epsilon = 1e-8);
        assert_abs_diff_eq!(u[1], 0.25f64.cbrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(u[0], -0.629_960_524_947_436_6, epsilon = 1e-13);
    }

    #[test]
    fn three_ions_match_closed_form() {
        let u = solve_equilibrium(3).unwrap();
        let oracle = bisect_three_ion();
        assert_abs_diff_eq!(u[2], oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(u[2], 1.25f64.cbrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_ions_is_rejected() {
        assert!(solve_equilibrium(0).is_err());
    }

    #[test]
    fn equilibrium_invariants_up_to_twenty_ions() {
        for n in 2..=20 {
            let u = solve_equilibrium(n).unwrap();
            let s = u.as_slice().unwrap();
            assert!(max_norm(&gradient(s)) < 1e-12, "N={n}");
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            for i in 0..n {
                assert!((u[i] + u[n - 1 - i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn length_scale_for_calcium_at_two_megahertz() {
        let lz = length_scale(CA40_ION_MASS, hz_to_rad(2e6));
        // direct evaluation: (e²/(4π ε₀ m ω²))^{1/3}
        assert!((lz - 2.8027e-6).abs() < 1e-9, "{lz}");
    }

    #[test]
    fn length_scale_power_laws() {
        let w = hz_to_rad(1e6);
        let base = length_scale(CA40_ION_MASS, w);
        assert_abs_diff_eq!(base / length_scale(CA40_ION_MASS, 4.0 * w), 4f64.powf(2.0 / 3.0), epsilon = 1e-12);
        assert_abs_diff_eq!(base / length_scale(2.0 * CA40_ION_MASS, w), 2f64.cbrt(), epsilon = 1e-12);
    }

    fn chain(n: usize) -> EquilibriumChain {
        EquilibriumChain { u: solve_equilibrium(n).unwrap(), l_z: 1.0 }
    }

    #[test]
    fn two_ion_axial_hessian() {
        let h = hessians(&chain(2), 0.1, 0.05).unwrap();
        assert_abs_diff_eq!(h.vz[[0, 0]], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.vz[[0, 1]], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.vz[[1, 1]], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn axial_rows_sum_to_one() {
        for n in 2..8 {
            let h = hessians(&chain(n), 0.1, 0.05).unwrap();
            for row in h.vz.rows() {
                assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-11);
            }
        }
    }

    /// Full 3D dimensionless potential for ions displaced off the axis.
    fn full_potential(pos: &[[f64; 3]], alpha_x: f64, alpha_y: f64) -> f64 {
        let mut v = 0.0;
        for p in pos {
            v += 0.5 * (p[0] * p[0] / alpha_x + p[1] * p[1] / alpha_y + p[2] * p[2]);
        }
        for i in 0..pos.len() {
            for j in i + 1..pos.len() {
                let d: f64 = (0..3).map(|k| (pos[i][k] - pos[j][k]).powi(2)).sum::<f64>().sqrt();
                v += 1.0 / d;
            }
        }
        v
    }

    #[test]
    fn radial_hessian_matches_finite_differences() {
        let (ax, ay) = (0.3, 0.2);
        let c = chain(4);
        let h = hessians(&c, ax, ay).unwrap();
        let base: Vec<[f64; 3]> = c.u.iter().map(|&z| [0.0, 0.0, z]).collect();
        let eps = 1e-4;
        for i in 0..4 {
            for j in 0..4 {
                let shifted = |di: f64, dj: f64| {
                    let mut p = base.clone();
                    p[i][0] += di;
                    p[j][0] += dj;
                    full_potential(&p, ax, ay)
                };
                let fd = (shifted(eps, eps) - shifted(eps, -eps) - shifted(-eps, eps) + shifted(-eps, -eps)) / (4.0 * eps * eps);
                assert!((fd - h.vx[[i, j]]).abs() < 1e-6, "({i},{j}) fd {fd} vs {}", h.vx[[i, j]]);
            }
        }
    }

    #[test]
    fn three_ion_eigenvalues() {
        let h = hessians(&chain(3), 0.2, 0.1).unwrap();
        let modes = normal_modes(&h).unwrap();
        assert_abs_diff_eq!(modes.lambda_z[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(modes.lambda_z[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(modes.lambda_z[2], 29.0 / 5.0, epsilon = 1e-12);
    }

    #[test]
    fn table_one_zigzag_frequency() {
        let trap = TrapConfig::new(3, CA40_ION_MASS, hz_to_rad(3.1012e6), hz_to_rad(5e6), hz_to_rad(2e6)).unwrap();
        let c = Crystal::new(trap).unwrap();
        let f = c.zigzag_frequency() / std::f64::consts::TAU;
        assert!((f - 131.95e3).abs() < 0.2e3, "zigzag {f} Hz");
    }

    #[test]
    fn mode_invariants() {
        for n in 1..=10 {
            let h = hessians(&chain(n), 0.01, 0.005).unwrap();
            let modes = normal_modes(&h).unwrap();
            let mtm = modes.m.t().dot(&modes.m);
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((mtm[[i, j]] - target).abs() < 1e-12);
                }
            }
            assert!((modes.lambda_z[0] - 1.0).abs() < 1e-10);
            for i in 0..n {
                assert!((modes.m[[i, 0]] - 1.0 / (n as f64).sqrt()).abs() < 1e-12);
            }
            let scale = modes.lambda_z[n - 1];
            for (hess, gamma) in [(&h.vz, &modes.lambda_z), (&h.vx, &modes.gamma_x), (&h.vy, &modes.gamma_y)] {
                let d = modes.m.t().dot(hess).dot(&modes.m);
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            assert!(d[[i, j]].abs() < 1e-10 * scale);
                        }
                    }
                    assert!((d[[i, i]] - gamma[i]).abs() < 1e-10 * scale);
                }
            }
            for k in 0..n {
                assert_eq!(modes.gamma_x[k], 1.0 / 0.01 + 0.5 - modes.lambda_z[k] / 2.0);
            }
        }
    }

    #[test]
    fn unstable_chain_is_reported() {
        let h = hessians(&chain(3), 0.45, 0.1).unwrap();
        let err = normal_modes(&h).unwrap_err().to_string();
        assert!(err.contains("chain unstable"), "{err}");
        assert!(err.contains("zigzag"), "{err}");
    }

    #[test]
    fn critical_anisotropy_three_ions() {
        let ac = critical_anisotropy(3).unwrap();
        assert_abs_diff_eq!(ac, 2.0 / 4.8, epsilon = 1e-12);
        // bisection oracle on γ_N^x(α) = 1/α + ½ − λ_N/2
        let lambda_n = 5.8;
        let g = |a: f64| 1.0 / a + 0.5 - lambda_n / 2.0;
        let (mut lo, mut hi) = (0.1, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(ac, lo, epsilon = 1e-12);
        for a in [0.1, 0.3, 0.41, 0.4166] {
            assert!(g(a) > 0.0);
        }
    }

    #[test]
    fn stretch_zigzag_resonance_at_twenty_over_sixty_three() {
        let h = hessians(&chain(3), 20.0 / 63.0, 0.1).unwrap();
        let modes = normal_modes(&h).unwrap();
        assert_abs_diff_eq!(modes.gamma_x[2], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(modes.lambda_z[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(2.0 * modes.gamma_x[2].sqrt(), modes.lambda_z[1].sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sign_convention_largest_entry_positive() {
        let h = hessians(&chain(5), 0.1, 0.05).unwrap();
        let modes = normal_modes(&h).unwrap();
        for col in modes.m.columns() {
            let big = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let first = col.iter().find(|x| x.abs() >= big - 1e-9).unwrap();
            assert!(*first > 0.0);
        }
    }
}
