//! Dense complex linear algebra used by the operator and propagator code.
//!
//! The matrix exponential follows the scaling-and-squaring scheme with
//! degree 3/5/7/9/13 Padé approximants (Higham 2005). Hermitian and real
//! symmetric eigenproblems are delegated to `nalgebra`.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64 as C64;

pub type CMatrix = Array2<C64>;

const C0: C64 = C64 { re: 0.0, im: 0.0 };
const C1: C64 = C64 { re: 1.0, im: 0.0 };

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, C1)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

/// Kronecker product `a ⊗ b` with `a` as the slow index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == C0 {
            continue;
        }
        let mut blk = out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
        blk.zip_mut_with(b, |o, &y| *o = x * y);
    }
    out
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diag().sum()
}

/// Largest absolute column sum.
pub fn one_norm(a: ArrayView2<C64>) -> f64 {
    a.axis_iter(Axis(1)).map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Hermiticity residual `max |A - A†|`.
pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            r = r.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    r
}

/// Solve `A X = B` by LU decomposition with partial pivoting.
///
/// Returns `None` when a pivot underflows, i.e. `A` is numerically singular.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "lu_solve: A must be square");
    assert_eq!(n, b.nrows(), "lu_solve: shape mismatch");
    let mut lu = a.to_owned();
    let mut x = b.to_owned();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, pmax) = (k..n).map(|i| (i, lu[[i, k]].norm())).fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if pmax <= scale * 1e-300 {
            return None;
        }
        if p != k {
            for j in 0..n {
                lu.swap([k, j], [p, j]);
            }
            for j in 0..x.ncols() {
                x.swap([k, j], [p, j]);
            }
        }
        let pivot = lu[[k, k]];
        for i in k + 1..n {
            let f = lu[[i, k]] / pivot;
            if f == C0 {
                continue;
            }
            lu[[i, k]] = f;
            for j in k + 1..n {
                let t = lu[[k, j]];
                lu[[i, j]] -= f * t;
            }
            for j in 0..x.ncols() {
                let t = x[[k, j]];
                x[[i, j]] -= f * t;
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = lu[[k, k]];
        for j in 0..x.ncols() {
            let mut acc = x[[k, j]];
            for i in k + 1..n {
                acc -= lu[[k, i]] * x[[i, j]];
            }
            x[[k, j]] = acc / pivot;
        }
    }
    Some(x)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 5] = [1.495585217958292e-2, 2.53939833006323e-1, 9.504178996162932e-1, 2.097847961257068e0, 5.371920351148152e0];

fn scaled(a: &CMatrix, s: f64) -> CMatrix {
    a.mapv(|z| z * s)
}

fn add_scaled(acc: &mut CMatrix, a: &CMatrix, s: f64) {
    acc.zip_mut_with(a, |x, &y| *x += y * s);
}

fn add_identity(acc: &mut CMatrix, s: f64) {
    for d in acc.diag_mut() {
        *d += s;
    }
}

/// Low-degree Padé numerator/denominator pieces `(U, V)` with `exp(A) ≈ (V-U)⁻¹(V+U)`.
fn pade_low(a: &CMatrix, coeffs: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let m = coeffs.len() - 1;
    let mut powers = vec![a2.clone()];
    for _ in 1..m / 2 {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let mut u_inner = Array2::zeros((n, n));
    add_identity(&mut u_inner, coeffs[1]);
    let mut v = Array2::zeros((n, n));
    add_identity(&mut v, coeffs[0]);
    for (k, p) in powers.iter().enumerate() {
        add_scaled(&mut u_inner, p, coeffs[2 * k + 3]);
        add_scaled(&mut v, p, coeffs[2 * k + 2]);
    }
    (a.dot(&u_inner), v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &PADE13;
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let mut w1 = scaled(&a6, b[13]);
    add_scaled(&mut w1, &a4, b[11]);
    add_scaled(&mut w1, &a2, b[9]);
    let mut w2 = scaled(&a6, b[7]);
    add_scaled(&mut w2, &a4, b[5]);
    add_scaled(&mut w2, &a2, b[3]);
    add_identity(&mut w2, b[1]);
    let u = a.dot(&(a6.dot(&w1) + w2));
    let mut z1 = scaled(&a6, b[12]);
    add_scaled(&mut z1, &a4, b[10]);
    add_scaled(&mut z1, &a2, b[8]);
    let mut z2 = scaled(&a6, b[6]);
    add_scaled(&mut z2, &a4, b[4]);
    add_scaled(&mut z2, &a2, b[2]);
    add_identity(&mut z2, b[0]);
    let v = a6.dot(&z1) + z2;
    (u, v)
}

/// Matrix exponential `exp(A)` by scaling and squaring.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }
    if n == 1 {
        return Array2::from_elem((1, 1), a[[0, 0]].exp());
    }
    let norm = one_norm(a.view());
    let degrees: [&[f64]; 4] = [&PADE3, &PADE5, &PADE7, &PADE9];
    for (deg, theta) in degrees.iter().zip(THETA.iter()) {
        if norm <= *theta {
            let (u, v) = pade_low(a, deg);
            return pade_quotient(&u, &v);
        }
    }
    let s = if norm > THETA[4] { (norm / THETA[4]).log2().ceil().max(0.0) as i32 } else { 0 };
    let a_s = scaled(a, 0.5f64.powi(s));
    let (u, v) = pade13(&a_s);
    let mut r = pade_quotient(&u, &v);
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

fn pade_quotient(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let p = v + u;
    let q = v - u;
    lu_solve(&q, &p).expect("Padé denominator is singular")
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let vecs = Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    let n = a.nrows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        // symmetrize so round-off in the input cannot produce complex eigenvalues
        (a[[i, j]] + a[[j, i]].conj()) * 0.5
    });
    let mut vals: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}
