//! Third- and fourth-order Taylor coefficients of the Coulomb interaction in
//! the position basis, and their contractions into the normal-mode basis.

use ndarray::{Array2, Array3, Array4};

use crate::crystal::EquilibriumChain;
use crate::error::{Error, Result};

/// `C3[i][j][k]`; nonzero only when at most two distinct indices appear.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTensor3 {
    pub c3: Array3<f64>,
}

/// `C4[i][j][k][l]`; fully symmetric, vanishing line sums.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingTensor4 {
    pub c4: Array4<f64>,
}

/// Coupling tensors in the normal-mode basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeTensors {
    pub d3: Array3<f64>,
    pub d4: Array4<f64>,
}

/// `sgn(u_a − u_b)/|u_a − u_b|⁴`
fn signed_quartic(u: &[f64], a: usize, b: usize) -> f64 {
    let d = u[a] - u[b];
    d.signum() / d.powi(4)
}

pub fn c3_tensor(chain: &EquilibriumChain) -> CouplingTensor3 {
    let u = chain.u.as_slice().expect("contiguous positions");
    let n = u.len();
    let c3 = Array3::from_shape_fn((n, n, n), |(i, j, k)| {
        if i == j && j == k {
            (0..n).filter(|&p| p != k).map(|p| signed_quartic(u, k, p)).sum()
        } else if i == j {
            signed_quartic(u, k, j)
        } else if j == k {
            signed_quartic(u, i, k)
        } else if i == k {
            signed_quartic(u, j, k)
        } else {
            0.0
        }
    });
    CouplingTensor3 { c3 }
}

pub fn c4_tensor(chain: &EquilibriumChain) -> CouplingTensor4 {
    let u = chain.u.as_slice().expect("contiguous positions");
    let n = u.len();
    let c4 = Array4::from_shape_fn((n, n, n, n), |(i, j, k, l)| {
        let idx = [i, j, k, l];
        let a = i;
        let Some(b) = idx.iter().copied().find(|&x| x != a) else {
            return (0..n).filter(|&p| p != a).map(|p| (u[a] - u[p]).abs().powi(-5)).sum();
        };
        if idx.iter().any(|&x| x != a && x != b) {
            return 0.0;
        }
        let count_a = idx.iter().filter(|&&x| x == a).count();
        let inv = (u[a] - u[b]).abs().powi(-5);
        if count_a == 2 {
            inv
        } else {
            -inv
        }
    });
    CouplingTensor4 { c4 }
}

/// `D3[n][m][p] = Σ C3[i][j][k] M[i][n] M[j][m] M[k][p]` and the analogous
/// four-index contraction.
pub fn mode_tensors(c3: &CouplingTensor3, c4: &CouplingTensor4, m: &Array2<f64>) -> Result<ModeTensors> {
    let n = m.nrows();
    if m.ncols() != n || c3.c3.dim() != (n, n, n) || c4.c4.dim() != (n, n, n, n) {
        return Err(Error::Anharmonic(format!("mode_tensors: dimension mismatch (M {:?}, C3 {:?}, C4 {:?})", m.dim(), c3.c3.dim(), c4.c4.dim())));
    }
    // contract one index at a time, always the leading position index, so the
    // reduction order is fixed
    let mut t3 = c3.c3.clone();
    for _ in 0..3 {
        let mut next = Array3::zeros((n, n, n));
        for ((a, b, p), v) in next.indexed_iter_mut() {
            *v = (0..n).map(|i| t3[[i, a, b]] * m[[i, p]]).sum();
        }
        t3 = next;
    }
    let mut t4 = c4.c4.clone();
    for _ in 0..4 {
        let mut next = Array4::zeros((n, n, n, n));
        for ((a, b, c, p), v) in next.indexed_iter_mut() {
            *v = (0..n).map(|i| t4[[i, a, b, c]] * m[[i, p]]).sum();
        }
        t4 = next;
    }
    Ok(ModeTensors { d3: t3, d4: t4 })
}
