use std::f64::consts::PI;

use ion2d::phasenoise::{contrast_loss, loss_table, reference_diffusion, WienerPhaseModel, TABLE_SIGNATURES};
use proptest::prelude::*;

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    (m, xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn ten_second_spread_is_one_turn() {
    let model = WienerPhaseModel::new(reference_diffusion(), 5).unwrap();
    let x = model.sample_paths(&[1.0, 10.0], 40_000).unwrap();
    let (m, v) = mean_var(x.column(1).iter().copied());
    let want = (2.0 * PI).powi(2);
    assert!(m.abs() < 4.0 * (want / 40_000.0).sqrt(), "{m}");
    assert!((v / want - 1.0).abs() < 0.03, "{v} vs {want}");
    // Cov[X(1), X(10)] = c·1
    let (m1, _) = mean_var(x.column(0).iter().copied());
    let cov = x.rows().into_iter().map(|r| (r[0] - m1) * (r[1] - m)).sum::<f64>() / 39_999.0;
    assert!((cov / reference_diffusion() - 1.0).abs() < 0.05, "{cov}");
}

#[test]
fn paths_are_reproducible() {
    let times = [1e-3, 2e-3, 5e-3];
    let a = WienerPhaseModel::new(3.0, 9).unwrap().sample_paths(&times, 64).unwrap();
    let b = WienerPhaseModel::new(3.0, 9).unwrap().sample_paths(&times, 64).unwrap();
    let c = WienerPhaseModel::new(3.0, 10).unwrap().sample_paths(&times, 64).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // path k does not depend on how many paths are drawn
    let d = WienerPhaseModel::new(3.0, 9).unwrap().sample_paths(&times, 8).unwrap();
    assert_eq!(d.row(7), a.row(7));
}

#[test]
fn monte_carlo_matches_gaussian_average() {
    // for a Wiener phase, ⟨cos Φ⟩ = exp(−Var Φ / 2) exactly
    let c = 40.0;
    let (t1, t3) = (2e-3, 3e-3);
    let model = WienerPhaseModel::new(c, 1).unwrap();
    for q in TABLE_SIGNATURES {
        let (att, err) = model.attenuation(q, t1, t3, 50_000).unwrap();
        let total = (q[0] + q[1] + q[2]) as f64;
        let var = c * (total * total * t1 + (q[2] * q[2]) as f64 * t3);
        let exact = (-0.5 * var).exp();
        assert!((att - exact).abs() < 4.0 * err + 1e-12, "{q:?}: {att} vs {exact} ± {err}");
        let approx = 1.0 - contrast_loss(q, t1, t3, c).unwrap().loss;
        assert!((approx - exact).abs() < 0.5 * (0.5 * var).powi(2) + 1e-15);
    }
}

#[test]
fn regime_warning() {
    let c = reference_diffusion();
    assert!(contrast_loss([1, -1, -1], 2.5e-3, 2.5e-3, c).unwrap().warning.is_none());
    let w = contrast_loss([1, -1, -1], 0.05, 0.05, c).unwrap().warning;
    assert!(w.is_some_and(|s| s.contains("not small")));
}

#[test]
fn invalid_inputs() {
    assert!(WienerPhaseModel::new(-1.0, 0).is_err());
    assert!(contrast_loss([1, -1, -1], -1.0, 0.0, 1.0).is_err());
    let m = WienerPhaseModel::new(1.0, 0).unwrap();
    assert!(m.sample_paths(&[2.0, 1.0], 4).is_err());
    assert!(m.attenuation([1, -1, -1], 1.0, 1.0, 1).is_err());
}

#[test]
fn table_rows_follow_signature_list() {
    let rows = loss_table(2.5e-3, 2.5e-3, reference_diffusion()).unwrap();
    let sigs: Vec<[i32; 3]> = rows.iter().map(|r| r.signature).collect();
    assert_eq!(sigs, TABLE_SIGNATURES.to_vec());
}

proptest! {
    #[test]
    fn loss_is_quadratic_in_signature(q in prop::array::uniform3(-3i32..4), t1 in 0.0f64..0.01, t3 in 0.0f64..0.01, c in 0.0f64..10.0) {
        let a = contrast_loss(q, t1, t3, c).unwrap().loss;
        let neg = contrast_loss([-q[0], -q[1], -q[2]], t1, t3, c).unwrap().loss;
        let dbl = contrast_loss([2 * q[0], 2 * q[1], 2 * q[2]], t1, t3, c).unwrap().loss;
        prop_assert!(a >= 0.0);
        prop_assert!((a - neg).abs() <= 1e-15);
        prop_assert!((dbl - 4.0 * a).abs() <= 1e-12 * a.max(1e-300));
    }
}
