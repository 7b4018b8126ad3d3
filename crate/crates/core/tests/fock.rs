use cising::fock::{
    build_hamiltonian, cutoff_convergence, feynman_kac_check, ground_state_report, semigroup_overlap,
    two_point_correlation, TruncatedModel,
};
use cising::ising_continuum::{estimate_correlation, IsingParams, RunSettings};
use cising::Kernel;

#[test]
fn semigroup_overlap_matches_path_integral() {
    let alpha = 0.1f64;
    let model = TruncatedModel::new(&[(1.0, 1.0)], 12, (8.0 * alpha).sqrt()).unwrap();
    assert!((model.alpha() - alpha).abs() < 1e-14);
    let report = feynman_kac_check(&model, 1.0, 200_000, 31).unwrap();
    assert!(report.exact > 1.0);
    assert!(report.deviation < 4.0, "{report:?}");
}

#[test]
fn single_boson_cutoff_has_closed_form() {
    for lambda in [0.3, 1.0, 2.5] {
        let model = TruncatedModel::new(&[(1.0, 1.0)], 1, lambda).unwrap();
        let r = ground_state_report(&model).unwrap();
        let c2 = (lambda / 2.0f64).powi(2);
        let e0 = 1.5 - (2.25 + c2).sqrt();
        let rho = (e0 - 3.0).powi(2) / (c2 + (e0 - 3.0).powi(2));
        assert!((r.energy - e0).abs() < 1e-12);
        assert!((r.rho - rho).abs() < 1e-12);
    }
}

#[test]
fn cutoff_sequence_settles() {
    let model = TruncatedModel::new(&[(1.0, 1.0), (2.0, 0.5)], 2, 1.0).unwrap();
    let table = cutoff_convergence(&model, &[2, 4, 6, 8]).unwrap();
    let energies: Vec<f64> = table.rows.iter().map(|r| r.energy).collect();
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{energies:?}");
    }
    let err = table.truncation_error.unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn free_overlap_is_one() {
    let model = TruncatedModel::new(&[(1.0, 1.0)], 4, 0.0).unwrap();
    for t in [0.5, 3.0, 20.0] {
        assert_eq!(semigroup_overlap(&model, t).unwrap(), 1.0);
    }
}

#[test]
fn oversized_basis_is_rejected() {
    let modes: Vec<(f64, f64)> = (1..=6).map(|k| (k as f64, 1.0)).collect();
    let model = TruncatedModel::new(&modes, 10, 1.0).unwrap();
    assert!(build_hamiltonian(&model).is_err());
}

#[test]
fn chain_two_point_matches_semigroup() {
    for (alpha, horizon, n_max) in [(1.0f64, 2.0, 30), (4.0, 3.0, 60)] {
        let model = TruncatedModel::new(&[(1.0, 1.0)], n_max, (8.0 * alpha).sqrt()).unwrap();
        let exact = two_point_correlation(&model, horizon, 1.0).unwrap();
        let params = IsingParams::new(alpha, horizon, Kernel::single_mode(1.0, 1.0).unwrap()).unwrap();
        let e = estimate_correlation(&params, &[1.0], &RunSettings::new(40_000, 2_000, 41).with_chains(8)).unwrap();
        assert!((e.mean - exact).abs() < 4.0 * e.stderr, "alpha {alpha}: {} +- {} vs {exact}", e.mean, e.stderr);
    }
}
