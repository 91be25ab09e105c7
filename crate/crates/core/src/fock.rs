//! Truncated bosonic Fock spaces: ladder operators, displacements, thermal
//! states and embedding of single-mode operators into a multimode register.
//!
//! Register order is slot 0 as the slowest Kronecker index.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm, identity, kron, CMatrix};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockRegister {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
}

impl FockRegister {
    pub fn new(dims: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Fock("register needs at least one mode".into()));
        }
        if dims.len() != labels.len() {
            return Err(Error::Fock(format!("{} dims but {} labels", dims.len(), labels.len())));
        }
        if let Some((i, d)) = dims.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(Error::Fock(format!("mode {} ({}) has dimension {d} < 2", i, labels[i])));
        }
        Ok(Self { dims, labels })
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn slot(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Occupation numbers of basis state `index`.
    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.dims.len()];
        for (slot, &d) in self.dims.iter().enumerate().rev() {
            occ[slot] = index % d;
            index /= d;
        }
        occ
    }
}

/// Single-mode ladder and number operators.
#[derive(Clone, Debug)]
pub struct ModeOperators {
    pub a: CMatrix,
    pub a_dag: CMatrix,
    pub n: CMatrix,
}

pub fn annihilation(dim: usize) -> CMatrix {
    let mut a = Array2::zeros((dim, dim));
    for k in 1..dim {
        a[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn mode_operators(dim: usize) -> Result<ModeOperators> {
    if dim < 2 {
        return Err(Error::Fock(format!("mode dimension must be >= 2, got {dim}")));
    }
    let a = annihilation(dim);
    let a_dag = a.t().to_owned();
    let n = Array2::from_diag(&ndarray::Array1::from_iter((0..dim).map(|k| C64::new(k as f64, 0.0))));
    Ok(ModeOperators { a, a_dag, n })
}

/// `exp(α a† − α* a)` on the truncated space.
pub fn displacement(alpha: C64, dim: usize) -> CMatrix {
    let a = annihilation(dim);
    let gen = a.t().mapv(|x| x * alpha) - a.mapv(|x| x * alpha.conj());
    expm(&gen)
}

/// Warning text when `|α|` is large compared with the truncation.
pub fn truncation_warning(alpha: C64, dim: usize) -> Option<String> {
    let n = alpha.norm_sqr();
    (3.0 * n > dim as f64).then(|| format!("displacement |alpha|^2 = {n:.4} is large for a truncation of {dim} levels"))
}

/// Thermal state renormalized on the truncated space.
#[derive(Clone, Debug)]
pub struct ThermalState {
    pub rho: CMatrix,
    pub probabilities: Vec<f64>,
    /// Probability held by the kept levels before renormalization.
    pub captured: f64,
}

pub fn thermal_state(nbar: f64, dim: usize) -> Result<ThermalState> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::Fock(format!("mean occupation must be >= 0, got {nbar}")));
    }
    if dim < 1 {
        return Err(Error::Fock("thermal_state: dimension must be >= 1".into()));
    }
    let x = nbar / (1.0 + nbar);
    let raw: Vec<f64> = (0..dim).map(|k| (1.0 - x) * x.powi(k as i32)).collect();
    let captured: f64 = if nbar == 0.0 { 1.0 } else { 1.0 - x.powi(dim as i32) };
    let total: f64 = raw.iter().sum();
    let probabilities: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let rho = Array2::from_diag(&ndarray::Array1::from_iter(probabilities.iter().map(|&p| C64::new(p, 0.0))));
    Ok(ThermalState { rho, probabilities, captured })
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` in `slot`.
pub fn embed(op: &CMatrix, slot: usize, register: &FockRegister) -> Result<CMatrix> {
    let Some(&d) = register.dims.get(slot) else {
        return Err(Error::Fock(format!("slot {slot} out of range for {} modes", register.n_modes())));
    };
    if op.dim() != (d, d) {
        return Err(Error::Fock(format!("operator shape {:?} does not match slot {slot} dimension {d}", op.dim())));
    }
    let before: usize = register.dims[..slot].iter().product();
    let after: usize = register.dims[slot + 1..].iter().product();
    let mut out = kron(&identity(before), op);
    if after > 1 {
        out = kron(&out, &identity(after));
    }
    Ok(out)
}

/// Tensor product of per-slot operators in register order.
pub fn product_operator(factors: &[CMatrix], register: &FockRegister) -> Result<CMatrix> {
    if factors.len() != register.n_modes() {
        return Err(Error::Fock(format!("{} factors for {} modes", factors.len(), register.n_modes())));
    }
    let mut out = identity(1);
    for (slot, f) in factors.iter().enumerate() {
        if f.dim() != (register.dims[slot], register.dims[slot]) {
            return Err(Error::Fock(format!("factor {slot} has shape {:?}", f.dim())));
        }
        out = kron(&out, f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, hermitian_eigenvalues, max_abs_diff, trace};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn ladder_basics() {
        let ops = mode_operators(5).unwrap();
        assert_eq!(ops.a[[0, 1]], c(1.0));
        for k in 0..5 {
            assert_eq!(ops.n[[k, k]], c(k as f64));
        }
        assert!(max_abs_diff(&ops.n, &ops.a_dag.dot(&ops.a)) < 1e-15);
        let comm = commutator(&ops.a, &ops.a_dag);
        for i in 0..5 {
            for j in 0..5 {
                let want = match (i == j, i) {
                    (true, 4) => -4.0,
                    (true, _) => 1.0,
                    _ => 0.0,
                };
                assert!((comm[[i, j]] - c(want)).norm() < 1e-14);
            }
        }
        assert!(mode_operators(1).is_err());
    }

    #[test]
    fn displacement_identity_and_overlap() {
        assert!(max_abs_diff(&displacement(c(0.0), 6), &identity(6)) < 1e-15);
        let d = displacement(c(0.25), 12);
        // series oracle for ⟨0|D(α)|0⟩ = e^{−|α|²/2}
        let series: f64 = (0..30).map(|k| (-0.5 * 0.0625f64).powi(k) / (1..=k).map(f64::from).product::<f64>()).sum();
        assert!((d[[0, 0]].norm() - series).abs() < 1e-12);
        assert!((d[[0, 0]].norm() - 0.9692).abs() < 1e-4);
    }

    #[test]
    fn displacement_inverse_and_unitarity() {
        for &(alpha, dim) in &[(C64::new(0.25, 0.0), 9), (C64::from_polar(0.5, 1.1), 9), (C64::from_polar(0.5, -2.0), 15)] {
            let d = displacement(alpha, dim);
            let back = displacement(-alpha, dim);
            assert!(max_abs_diff(&d.dot(&back), &identity(dim)) < 1e-8);
            let dd = d.t().mapv(|z| z.conj()).dot(&d);
            assert!(max_abs_diff(&dd, &identity(dim)) < 1e-10);
        }
    }

    #[test]
    fn truncation_warning_threshold() {
        assert!(truncation_warning(c(0.25), 9).is_none());
        assert!(truncation_warning(c(2.0), 9).is_some());
    }

    #[test]
    fn thermal_captures() {
        let t = thermal_state(0.0, 5).unwrap();
        assert_eq!(t.rho[[0, 0]], c(1.0));
        assert_eq!(t.captured, 1.0);
        let t = thermal_state(1.0, 9).unwrap();
        assert!((t.captured - (1.0 - 0.5f64.powi(9))).abs() < 1e-15);
        assert!((t.captured - 0.998).abs() < 1e-3);
        let t = thermal_state(4.0, 15).unwrap();
        assert!((t.captured - 0.9648).abs() < 1e-4);
        assert!((trace(&t.rho).re - 1.0).abs() < 1e-14);
        assert!(thermal_state(-1.0, 3).is_err());
    }

    fn truncated_mean(nbar: f64, dim: usize) -> f64 {
        let t = thermal_state(nbar, dim).unwrap();
        t.probabilities.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    #[test]
    fn thermal_mean_within_two_percent_for_zigzag_truncations() {
        for &(nbar, dim) in &[(1.0, 9), (0.7, 9), (0.2, 6)] {
            let mean = truncated_mean(nbar, dim);
            assert!((mean - nbar).abs() <= 0.02 * nbar, "{nbar} {dim} {mean}");
        }
    }

    #[test]
    fn spectator_truncation_lowers_the_mean() {
        // closed form of the renormalized geometric mean, x = 0.8, 15 levels
        let x: f64 = 0.8;
        let num: f64 = (0..15).map(|k| k as f64 * x.powi(k)).sum();
        let den: f64 = (0..15).map(|k| x.powi(k)).sum();
        let mean = truncated_mean(4.0, 15);
        assert!((mean - num / den).abs() < 1e-12);
        assert!((mean - 3.4530).abs() < 1e-4);
    }

    fn reg() -> FockRegister {
        FockRegister::new(vec![3, 4, 2], vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn embedding() {
        let r = reg();
        assert!(max_abs_diff(&embed(&identity(4), 1, &r).unwrap(), &identity(24)) < 1e-15);
        let a = embed(&annihilation(3), 0, &r).unwrap();
        let b = embed(&annihilation(4), 1, &r).unwrap();
        assert!(max_abs_diff(&a.dot(&b), &b.dot(&a)) < 1e-15);
        assert!(embed(&identity(3), 3, &r).is_err());
        assert!(embed(&identity(3), 1, &r).is_err());
        // spectrum is the single-mode spectrum with multiplicity
        let n = mode_operators(4).unwrap().n;
        let ev = hermitian_eigenvalues(&embed(&n, 1, &r).unwrap());
        for k in 0..4 {
            assert_eq!(ev.iter().filter(|&&e| (e - k as f64).abs() < 1e-12).count(), 6);
        }
    }

    #[test]
    fn product_state_expectation() {
        let r = FockRegister::new(vec![9, 15], vec!["zz".into(), "y".into()]).unwrap();
        let t1 = thermal_state(1.0, 9).unwrap();
        let t4 = thermal_state(4.0, 15).unwrap();
        let rho = product_operator(&[t1.rho.clone(), t4.rho.clone()], &r).unwrap();
        let n = embed(&mode_operators(9).unwrap().n, 0, &r).unwrap();
        let got = trace(&n.dot(&rho)).re;
        let direct: f64 = t1.probabilities.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert!((got - direct).abs() < 1e-13);
    }

    #[test]
    fn register_validation_and_occupations() {
        assert!(FockRegister::new(vec![1], vec!["x".into()]).is_err());
        assert!(FockRegister::new(vec![2], vec![]).is_err());
        let r = reg();
        assert_eq!(r.total_dim(), 24);
        assert_eq!(r.occupations(0), vec![0, 0, 0]);
        assert_eq!(r.occupations(23), vec![2, 3, 1]);
        assert_eq!(r.occupations(8 + 2 + 1), vec![1, 1, 1]);
        assert_eq!(r.slot("b"), Some(1));
    }
}
