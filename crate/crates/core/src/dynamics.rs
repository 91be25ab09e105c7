//! Lindblad time evolution with cached propagators.
//!
//! Density matrices are vectorized row-major, `vec(ρ)[i·D + j] = ρ[i][j]`, so
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`. The generator is assembled sparsely and
//! split into the connected components of its coupling graph; each component
//! is exponentiated on its own. Number-conserving models with local
//! dissipators decompose into many small blocks.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilation, embed, FockRegister};
use crate::linalg::{expm, hermiticity_residual, max_abs, trace, CMatrix};

/// Default limit on the memory held by propagator blocks, bytes.
pub const DEFAULT_MEMORY_BUDGET: usize = 4 << 30;

const TRACE_DRIFT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct CollapseOp {
    pub op: CMatrix,
    /// 1/s
    pub rate: f64,
}

/// Hamiltonian in rad/s (ħ = 1) plus collapse operators on a register.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub h: CMatrix,
    pub collapse: Vec<CollapseOp>,
    pub register: FockRegister,
}

impl LindbladModel {
    pub fn new(h: CMatrix, collapse: Vec<CollapseOp>, register: FockRegister) -> Result<Self> {
        let d = register.total_dim();
        if h.dim() != (d, d) {
            return Err(Error::Dynamics(format!("Hamiltonian shape {:?} does not match register dimension {d}", h.dim())));
        }
        let herm = hermiticity_residual(&h);
        if herm > 1e-10 * max_abs(&h).max(1.0) {
            return Err(Error::Dynamics(format!("Hamiltonian is not Hermitian (residual {herm:.3e})")));
        }
        for (k, c) in collapse.iter().enumerate() {
            if !(c.rate >= 0.0 && c.rate.is_finite()) {
                return Err(Error::Dynamics(format!("collapse operator {k} has invalid rate {}", c.rate)));
            }
            if c.op.dim() != (d, d) {
                return Err(Error::Dynamics(format!("collapse operator {k} has shape {:?}", c.op.dim())));
            }
        }
        let collapse = collapse.into_iter().filter(|c| c.rate > 0.0).collect();
        Ok(Self { h, collapse, register })
    }

    pub fn dim(&self) -> usize {
        self.register.total_dim()
    }

    pub fn is_dissipative(&self) -> bool {
        !self.collapse.is_empty()
    }
}

/// Heating toward infinite temperature: `√Γ a` and `√Γ a†` with `Γ = ṅ`,
/// so `d⟨n⟩/dt = ṅ` regardless of the occupation.
pub fn heating_dissipator(slot: usize, rate_ndot: f64, register: &FockRegister) -> Result<Vec<CollapseOp>> {
    if !(rate_ndot >= 0.0 && rate_ndot.is_finite()) {
        return Err(Error::Dynamics(format!("heating rate must be >= 0, got {rate_ndot}")));
    }
    if rate_ndot == 0.0 {
        return Ok(Vec::new());
    }
    let d = *register.dims.get(slot).ok_or_else(|| Error::Dynamics(format!("heating slot {slot} out of range")))?;
    let a = annihilation(d);
    let a_dag = a.t().to_owned();
    Ok(vec![CollapseOp { op: embed(&a, slot, register)?, rate: rate_ndot }, CollapseOp { op: embed(&a_dag, slot, register)?, rate: rate_ndot }])
}

/// Coupling to a bath at mean occupation `nbar`: `√(γ(n̄+1)) a` and `√(γ n̄) a†`.
pub fn thermal_dissipator(slot: usize, gamma: f64, nbar: f64, register: &FockRegister) -> Result<Vec<CollapseOp>> {
    if !(gamma >= 0.0 && nbar >= 0.0 && gamma.is_finite() && nbar.is_finite()) {
        return Err(Error::Dynamics(format!("invalid bath parameters gamma = {gamma}, nbar = {nbar}")));
    }
    let d = *register.dims.get(slot).ok_or_else(|| Error::Dynamics(format!("bath slot {slot} out of range")))?;
    let a = annihilation(d);
    let a_dag = a.t().to_owned();
    let mut out = Vec::new();
    if gamma > 0.0 {
        out.push(CollapseOp { op: embed(&a, slot, register)?, rate: gamma * (nbar + 1.0) });
        if nbar > 0.0 {
            out.push(CollapseOp { op: embed(&a_dag, slot, register)?, rate: gamma * nbar });
        }
    }
    Ok(out)
}

fn nonzeros(m: &CMatrix) -> Vec<(usize, usize, C64)> {
    m.indexed_iter().filter(|(_, v)| v.norm() != 0.0).map(|((i, j), v)| (i, j, *v)).collect()
}

/// Sparse Lindblad generator in the row-major vectorization.
pub fn generator_entries(model: &LindbladModel) -> BTreeMap<(usize, usize), C64> {
    let d = model.dim();
    let idx = |i: usize, j: usize| i * d + j;
    let mut out: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    let mut add = |r: usize, c: usize, v: C64| {
        *out.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += v;
    };
    let mi = C64::new(0.0, -1.0);
    // −i(H⊗I) + i(I⊗Hᵀ), with the effective non-Hermitian part folded in
    let mut k_eff = model.h.mapv(|x| x * mi);
    let mut jumps = Vec::new();
    for c in &model.collapse {
        let ldl = c.op.t().mapv(|x| x.conj()).dot(&c.op);
        k_eff = k_eff - ldl.mapv(|x| x * 0.5 * c.rate);
        jumps.push((nonzeros(&c.op), c.rate));
    }
    let k_dag = k_eff.t().mapv(|x| x.conj());
    for (i, k, v) in nonzeros(&k_eff) {
        for j in 0..d {
            add(idx(i, j), idx(k, j), v);
        }
    }
    // ρ K† → (I ⊗ (K†)ᵀ)
    for (l, j, v) in nonzeros(&k_dag) {
        for i in 0..d {
            add(idx(i, j), idx(i, l), v);
        }
    }
    for (nz, rate) in &jumps {
        for &(i, k, a) in nz {
            for &(j, l, b) in nz {
                add(idx(i, j), idx(k, l), a * b.conj() * *rate);
            }
        }
    }
    out.retain(|_, v| v.norm() != 0.0);
    out
}

/// Dense generator, for tests and small registers.
pub fn generator_dense(model: &LindbladModel) -> CMatrix {
    let n = model.dim() * model.dim();
    let mut g = Array2::zeros((n, n));
    for ((r, c), v) in generator_entries(model) {
        g[[r, c]] = v;
    }
    g
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the index graph, each sorted, ordered by first index.
fn components(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

#[derive(Clone, Debug)]
pub struct Block {
    pub indices: Vec<usize>,
    pub matrix: CMatrix,
}

/// `exp(L dt)` stored block-diagonally, or the unitary `exp(−iH dt)` when
/// there is no dissipation.
#[derive(Clone, Debug)]
pub enum Propagator {
    Unitary { u: CMatrix, u_dag: CMatrix, step: f64 },
    Superoperator { dim: usize, blocks: Vec<Block>, step: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorStats {
    pub blocks: usize,
    pub largest_block: usize,
    pub bytes: usize,
}

fn exponentiate_blocks(groups: Vec<Vec<usize>>, entries: &BTreeMap<(usize, usize), C64>, n: usize, scale: C64) -> Vec<Block> {
    let mut position = vec![(0usize, 0usize); n];
    for (g, idx) in groups.iter().enumerate() {
        for (p, &i) in idx.iter().enumerate() {
            position[i] = (g, p);
        }
    }
    let mut mats: Vec<CMatrix> = groups.iter().map(|g| Array2::zeros((g.len(), g.len()))).collect();
    for (&(r, c), &v) in entries {
        let (g, pr) = position[r];
        let (_, pc) = position[c];
        mats[g][[pr, pc]] = v * scale;
    }
    groups
        .into_par_iter()
        .zip(mats.into_par_iter())
        .map(|(indices, m)| {
            let matrix = if indices.len() == 1 { m.mapv(|x| x.exp()) } else { expm(&m) };
            Block { indices, matrix }
        })
        .collect()
}

fn check_budget(groups: &[Vec<usize>], budget: usize, what: &str) -> Result<()> {
    let bytes: usize = groups.iter().map(|g| g.len() * g.len() * 16).sum();
    if bytes > budget {
        let largest = groups.iter().map(Vec::len).max().unwrap_or(0);
        return Err(Error::Dynamics(format!("{what} needs {bytes} bytes (largest block {largest}x{largest}), above the memory budget of {budget} bytes")));
    }
    Ok(())
}

pub fn build_propagator(model: &LindbladModel, dt: f64, memory_budget: usize) -> Result<Propagator> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Dynamics(format!("time step must be positive, got {dt}")));
    }
    let d = model.dim();
    if !model.is_dissipative() {
        let entries: BTreeMap<(usize, usize), C64> = nonzeros(&model.h).into_iter().map(|(i, j, v)| ((i, j), v)).collect();
        let groups = components(d, entries.keys().copied());
        check_budget(&[(0..d).collect()], memory_budget, "unitary propagator")?;
        let blocks = exponentiate_blocks(groups, &entries, d, C64::new(0.0, -dt));
        let mut u = Array2::zeros((d, d));
        for b in &blocks {
            for (p, &i) in b.indices.iter().enumerate() {
                for (q, &j) in b.indices.iter().enumerate() {
                    u[[i, j]] = b.matrix[[p, q]];
                }
            }
        }
        let u_dag = u.t().mapv(|x: C64| x.conj());
        return Ok(Propagator::Unitary { u, u_dag, step: dt });
    }
    let n = d * d;
    let entries = generator_entries(model);
    let groups = components(n, entries.keys().copied());
    check_budget(&groups, memory_budget, "Lindblad propagator")?;
    let blocks = exponentiate_blocks(groups, &entries, n, C64::new(dt, 0.0));
    Ok(Propagator::Superoperator { dim: d, blocks, step: dt })
}

fn vec_of(m: &CMatrix) -> Array1<C64> {
    Array1::from_iter(m.iter().copied())
}

fn unvec(v: Array1<C64>, d: usize) -> CMatrix {
    v.into_shape_with_order((d, d)).expect("square state")
}

impl Propagator {
    pub fn step(&self) -> f64 {
        match self {
            Propagator::Unitary { step, .. } | Propagator::Superoperator { step, .. } => *step,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Propagator::Unitary { u, .. } => u.nrows(),
            Propagator::Superoperator { dim, .. } => *dim,
        }
    }

    pub fn stats(&self) -> PropagatorStats {
        match self {
            Propagator::Unitary { u, .. } => PropagatorStats { blocks: 1, largest_block: u.nrows(), bytes: 2 * u.len() * 16 },
            Propagator::Superoperator { blocks, .. } => PropagatorStats {
                blocks: blocks.len(),
                largest_block: blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0),
                bytes: blocks.iter().map(|b| b.matrix.len() * 16).sum(),
            },
        }
    }

    fn apply_blocks(blocks: &[Block], v: &Array1<C64>, transpose: bool) -> Array1<C64> {
        let mut out = Array1::zeros(v.len());
        for b in blocks {
            let local = Array1::from_iter(b.indices.iter().map(|&i| v[i]));
            let res = if transpose { b.matrix.t().dot(&local) } else { b.matrix.dot(&local) };
            for (&i, x) in b.indices.iter().zip(res) {
                out[i] = x;
            }
        }
        out
    }

    /// One step of the Schrödinger-picture map, `ρ → E(ρ)`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        match self {
            Propagator::Unitary { u, u_dag, .. } => u.dot(rho).dot(u_dag),
            Propagator::Superoperator { dim, blocks, .. } => unvec(Self::apply_blocks(blocks, &vec_of(rho), false), *dim),
        }
    }

    /// One step of the adjoint map, defined by `tr[O E(ρ)] = tr[E†(O) ρ]`.
    pub fn apply_adjoint(&self, obs: &CMatrix) -> CMatrix {
        match self {
            Propagator::Unitary { u, u_dag, .. } => u_dag.dot(obs).dot(u),
            Propagator::Superoperator { dim, blocks, .. } => {
                let y = Self::apply_blocks(blocks, &vec_of(&obs.t().to_owned()), true);
                unvec(y, *dim).t().to_owned()
            }
        }
    }
}

pub(crate) fn hermitize(rho: &mut CMatrix) {
    let n = rho.nrows();
    for i in 0..n {
        rho[[i, i]].im = 0.0;
        for j in i + 1..n {
            let avg = (rho[[i, j]] + rho[[j, i]].conj()) * 0.5;
            rho[[i, j]] = avg;
            rho[[j, i]] = avg.conj();
        }
    }
}

/// Apply the propagator `steps` times, re-symmetrizing after each step.
pub fn evolve(state: &CMatrix, prop: &Propagator, steps: usize) -> Result<CMatrix> {
    if state.dim() != (prop.dim(), prop.dim()) {
        return Err(Error::Dynamics(format!("state shape {:?} does not match propagator dimension {}", state.dim(), prop.dim())));
    }
    let mut rho = state.clone();
    for k in 0..steps {
        rho = checked_step(&rho, |r| prop.apply(r)).map_err(|e| match e {
            Error::Dynamics(m) => Error::Dynamics(format!("{m} (step {k})")),
            other => other,
        })?;
    }
    Ok(rho)
}

/// Apply one step, re-symmetrize and verify the trace is kept.
pub(crate) fn checked_step(rho: &CMatrix, step: impl Fn(&CMatrix) -> CMatrix) -> Result<CMatrix> {
    let before = trace(rho);
    let mut out = step(rho);
    hermitize(&mut out);
    let drift = (trace(&out) - before).norm();
    if drift > TRACE_DRIFT_TOL {
        return Err(Error::Dynamics(format!("trace drift {drift:.3e} exceeds {TRACE_DRIFT_TOL:e}; propagator inaccurate")));
    }
    Ok(out)
}
