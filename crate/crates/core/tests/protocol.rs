use std::f64::consts::TAU;

use ion2d::dynamics::{build_propagator, thermal_dissipator, LindbladModel, DEFAULT_MEMORY_BUDGET};
use ion2d::fock::{annihilation, embed, thermal_state, FockRegister};
use ion2d::linalg::{dagger, CMatrix};
use ion2d::protocol::{phase_grid, run_once, scan, scan_with, KerrModel, PulseSequence, PulseSet, SignalGrid};
use ndarray::{Array2, Array3};
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KHZ: f64 = TAU * 1e3;

fn single(d: usize) -> FockRegister {
    FockRegister::new(vec![d], vec!["zz".into()]).unwrap()
}

fn number_model(omega: f64, d: usize) -> LindbladModel {
    let reg = single(d);
    let a = annihilation(d);
    let h = dagger(&a).dot(&a).mapv(|x| x * omega);
    LindbladModel::new(h, Vec::new(), reg).unwrap()
}

#[test]
fn no_pulses_returns_initial_population() {
    let m = number_model(10.0 * KHZ, 9);
    let prop = build_propagator(&m, 25e-6, DEFAULT_MEMORY_BUDGET).unwrap();
    let rho0 = thermal_state(0.7, 9).unwrap();
    let mean: f64 = rho0.probabilities.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let seq = PulseSequence::uniform(0.0, 4, [1, -1, -1]);
    for (n1, n3) in [(0, 0), (3, 5), (7, 1)] {
        let s = run_once(&prop, &rho0.rho, &seq, &m.register, n1, n3, [0.3, 1.1, 2.0]).unwrap();
        assert!((s - mean).abs() < 1e-12);
    }
}

#[test]
fn single_pulse_on_vacuum() {
    let m = number_model(10.0 * KHZ, 12);
    let prop = build_propagator(&m, 25e-6, DEFAULT_MEMORY_BUDGET).unwrap();
    let vac = thermal_state(0.0, 12).unwrap().rho;
    let mut seq = PulseSequence::uniform(0.0, 4, [1, -1, -1]);
    seq.amplitudes[0] = 0.25;
    let s = run_once(&prop, &vac, &seq, &m.register, 4, 4, [0.0; 3]).unwrap();
    assert!((s - 0.0625).abs() < 1e-12, "{s}");
}

fn cycled_run_once(evo: &ion2d::dynamics::Propagator, rho0: &CMatrix, seq: &PulseSequence, reg: &FockRegister, n1: usize, n3: usize) -> C64 {
    let [n2, n3p, n4] = seq.phase_counts;
    let (p2, p3, p4) = (phase_grid(n2), phase_grid(n3p), phase_grid(n4));
    let raw = Array3::from_shape_fn((n2, n3p, n4), |(a, b, c)| run_once(evo, rho0, seq, reg, n1, n3, [p2[a], p3[b], p4[c]]).unwrap());
    ion2d::protocol::phase_cycle(&raw, seq.signature)
}

fn kerr_like(d: usize) -> LindbladModel {
    let reg = single(d);
    let h = Array2::from_diag(&ndarray::Array1::from_iter((0..d).map(|n| {
        let n = n as f64;
        C64::new(2.56 * KHZ * n * (n - 1.0) + 15.2 * KHZ * n, 0.0)
    })));
    let mut collapse = thermal_dissipator(0, 150.0, 0.5, &reg).unwrap();
    collapse.truncate(2);
    LindbladModel::new(h, collapse, reg).unwrap()
}

#[test]
fn scan_matches_run_once() {
    let m = kerr_like(9);
    let rho0 = thermal_state(0.5, 9).unwrap().rho;
    let seq = PulseSequence::uniform(0.25, 4, [1, -1, -1]);
    let dt = 25.3e-6;
    let grid = scan(&m, &rho0, &seq, 5.0 * dt, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    assert_eq!(grid.values.dim(), (6, 6));
    let prop = build_propagator(&m, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    for (i, j) in [(0, 0), (2, 5), (5, 1)] {
        let want = cycled_run_once(&prop, &rho0, &seq, &m.register, i, j);
        assert!((grid.values[[i, j]] - want).norm() < 1e-12, "({i},{j}): {} vs {want}", grid.values[[i, j]]);
    }
    assert!(grid.values[[3, 3]].norm() > 1e-5);
    assert!((grid.t1[5] - 5.0 * dt).abs() < 1e-18);
}

fn kerr_test_model(spectator_dims: Vec<usize>) -> KerrModel {
    KerrModel {
        omega_si: 5.12 * KHZ,
        delta_omega: 15.2 * KHZ,
        couplings: vec![0.58 * KHZ, -1.37 * KHZ],
        dim_zz: 9,
        spectator_dims,
        nbar_zz: 1.0,
        spectator_nbar: vec![4.0, 4.0],
    }
}

#[test]
fn kerr_fast_path_matches_dense_evolution() {
    let model = kerr_test_model(vec![4, 3]);
    let seq = PulseSequence::uniform(0.25, 4, [1, -1, -1]);
    let dt = 25.3e-6;
    let fast = model.scan_fast(&seq, 40, dt).unwrap();
    let (dense, rho0) = model.dense().unwrap();
    let dense = scan(&dense, &rho0, &seq, 1e-3, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    assert_eq!(dense.values.dim(), (40, 40));
    let diff = fast.values.iter().zip(dense.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff < 1e-10, "{diff}");
    let peak = fast.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(peak > 1e-4);
}

#[test]
fn kerr_spectator_weights_sum_to_one() {
    let configs = kerr_test_model(vec![15, 15]).spectator_configurations().unwrap();
    assert_eq!(configs.len(), 225);
    assert_eq!(configs[16].0, vec![1, 1]);
    let total: f64 = configs.iter().map(|(_, w)| w).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn fast_path_rejects_other_slots() {
    let mut seq = PulseSequence::uniform(0.25, 4, [1, -1, -1]);
    seq.measure_slot = 1;
    assert!(kerr_test_model(vec![2, 2]).scan_fast(&seq, 4, 1e-5).is_err());
}

/// Random number-conserving quadratic Hamiltonian on two modes, hopping off resonance.
fn random_hopping(reg: &FockRegister, rng: &mut ChaCha8Rng) -> CMatrix {
    let a: Vec<CMatrix> = (0..2).map(|k| embed(&annihilation(reg.dims[k]), k, reg).unwrap()).collect();
    let w0 = rng.random_range(5.0..15.0) * KHZ;
    let w1 = rng.random_range(30.0..40.0) * KHZ;
    let g = C64::from_polar(rng.random_range(1.0..3.0) * KHZ, rng.random_range(0.0..TAU));
    let hop = dagger(&a[0]).dot(&a[1]).mapv(|x| x * g);
    dagger(&a[0]).dot(&a[0]).mapv(|x| x * w0) + dagger(&a[1]).dot(&a[1]).mapv(|x| x * w1) + &hop + dagger(&hop)
}

/// Single mode with weak random squeezing.
fn random_squeezing(reg: &FockRegister, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = annihilation(reg.dims[0]);
    let w = rng.random_range(10.0..30.0) * KHZ;
    let eps = C64::from_polar(rng.random_range(0.2..1.0) * KHZ, rng.random_range(0.0..TAU));
    let sq = a.dot(&a).mapv(|x| x * eps);
    dagger(&a).dot(&a).mapv(|x| x * w) + &sq + dagger(&sq)
}

fn max_abs(grid: &SignalGrid) -> f64 {
    grid.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn harmonic_dynamics_give_no_signal() {
    let alpha: f64 = 0.25;
    let bound = 1e-8 * alpha.powi(3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let seq = PulseSequence::uniform(alpha, 4, [1, -1, -1]);
    let dt = 20e-6;
    let reg = FockRegister::new(vec![16, 8], vec!["a".into(), "b".into()]).unwrap();
    let rho0 = ion2d::fock::product_operator(&[thermal_state(0.1, 16).unwrap().rho, thermal_state(0.02, 8).unwrap().rho], &reg).unwrap();
    let model = LindbladModel::new(random_hopping(&reg, &mut rng), Vec::new(), reg).unwrap();
    let grid = scan(&model, &rho0, &seq, 15.0 * dt, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    assert_eq!(grid.values.dim(), (16, 16));
    assert!(max_abs(&grid) < bound, "hopping: {}", max_abs(&grid));

    let reg = single(24);
    let w = rng.random_range(5.0..40.0) * KHZ;
    let model = LindbladModel::new(number_model(w, 24).h, thermal_dissipator(0, 300.0, 0.05, &reg).unwrap(), reg).unwrap();
    let grid = scan(&model, &thermal_state(0.1, 24).unwrap().rho, &seq, 15.0 * dt, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    assert!(max_abs(&grid) < bound, "thermal bath: {}", max_abs(&grid));

    let reg = single(24);
    let model = LindbladModel::new(random_squeezing(&reg, &mut rng), Vec::new(), reg).unwrap();
    let grid = scan(&model, &thermal_state(0.1, 24).unwrap().rho, &seq, 15.0 * dt, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    assert!(max_abs(&grid) < bound, "squeezing: {}", max_abs(&grid));
    // an anharmonic control does produce signal
    let m = kerr_like(12);
    let vac = thermal_state(0.1, 12).unwrap().rho;
    let grid = scan(&m, &vac, &seq, 15.0 * dt, dt, DEFAULT_MEMORY_BUDGET).unwrap();
    assert!(max_abs(&grid) > 1e3 * bound);
}

#[test]
fn scan_is_deterministic_across_pools() {
    let m = kerr_like(9);
    let rho0 = thermal_state(0.5, 9).unwrap().rho;
    let seq = PulseSequence::uniform(0.25, 4, [1, -1, -1]);
    let prop = build_propagator(&m, 25e-6, DEFAULT_MEMORY_BUDGET).unwrap();
    let pulses = PulseSet::new(&seq, &m.register).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| scan_with(&prop, &rho0, &pulses, &seq, 12, 25e-6).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert!(a.values.iter().zip(b.values.iter()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cycling_is_linear_in_the_initial_state(p in 0.0f64..1.0, nb1 in 0.0f64..1.5, nb2 in 0.0f64..1.5) {
        let m = kerr_like(8);
        let seq = PulseSequence::uniform(0.25, 4, [1, -1, -1]);
        let prop = build_propagator(&m, 25e-6, DEFAULT_MEMORY_BUDGET).unwrap();
        let pulses = PulseSet::new(&seq, &m.register).unwrap();
        let r1 = thermal_state(nb1, 8).unwrap().rho;
        let r2 = thermal_state(nb2, 8).unwrap().rho;
        let mix = r1.mapv(|x| x * p) + r2.mapv(|x| x * (1.0 - p));
        let g = |r: &CMatrix| scan_with(&prop, r, &pulses, &seq, 5, 25e-6).unwrap().values;
        let (s1, s2, sm) = (g(&r1), g(&r2), g(&mix));
        for ((a, b), c) in s1.iter().zip(s2.iter()).zip(sm.iter()) {
            prop_assert!((a * p + b * (1.0 - p) - c).norm() < 1e-13);
        }
    }

    #[test]
    fn planted_signature_is_recovered(re in -1.0f64..1.0, im in -1.0f64..1.0, n in 3usize..7) {
        let p = phase_grid(n);
        let z = C64::new(re, im);
        let raw = Array3::from_shape_fn((n, n, n), |(a, b, c)| {
            let phi = p[a] - p[b] - p[c];
            2.0 * (z * C64::from_polar(1.0, phi)).re
        });
        let got = ion2d::protocol::phase_cycle(&raw, [1, -1, -1]);
        prop_assert!((got - z).norm() < 1e-13);
    }
}
