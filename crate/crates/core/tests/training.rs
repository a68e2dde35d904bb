use std::f64::consts::PI;
use std::sync::Arc;

use qpnn::elements::{ImperfectionModel, KerrLayer};
use qpnn::engine::QpnnInstance;
use qpnn::tasks::{
    bsa_training_set, fredkin_bsa_fidelity, fredkin_bsa_unitary, linear_optical_bound, series_success_rate,
};
use qpnn::trainer::*;

#[test]
fn identity_network_bsa_infidelity() {
    // S = I: Phi+ and Psi+ each overlap their target with probability 1/2,
    // Phi- and Psi- not at all, so F = (1/2 + 1/2 + 0 + 0) / 4.
    let task = bsa_training_set().unwrap();
    let inst = QpnnInstance::ideal(Arc::clone(task.basis()), 2, KerrLayer::ideal(), task.qubit_pairing.clone()).unwrap();
    let zeros = vec![0.0; inst.param_count()];
    let c = objective(&zeros, &inst, &task.training_set, ObjectiveKind::Unconditional).unwrap();
    assert!((c - 0.75).abs() < 1e-14);
    let again = objective(&zeros, &inst, &task.training_set, ObjectiveKind::Unconditional).unwrap();
    assert_eq!(c, again);
    assert!(objective(&zeros[1..], &inst, &task.training_set, ObjectiveKind::Unconditional).is_err());
}

#[test]
fn in_situ_trace_and_determinism() {
    let task = bsa_training_set().unwrap();
    let arch = Architecture::new(2, PI, ImperfectionModel::realistic(0.3));
    for seed in 0..4 {
        let cfg = OptimizerConfig::default().with_seed(seed);
        let a = train_in_situ(&arch, &task, ObjectiveKind::Unconditional, &cfg).unwrap();
        let b = train_in_situ(&arch, &task, ObjectiveKind::Unconditional, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.windows(2).all(|w| w[1].best < w[0].best && w[1].eval > w[0].eval));
        assert_eq!(a.trace.last().unwrap().best, a.infidelity(ObjectiveKind::Unconditional));
        assert_eq!(a.final_params.len(), 32);
        assert!(a.final_params.iter().all(|x| (0.0..=2.0 * PI).contains(x)));
    }
}

#[test]
fn conditional_training_tracks_conditional_infidelity() {
    let task = bsa_training_set().unwrap();
    let arch = Architecture::new(2, PI / 2.0, ImperfectionModel::realistic(0.3));
    let cfg = OptimizerConfig::default().with_seed(2);
    let r = train_in_situ(&arch, &task, ObjectiveKind::Conditional, &cfg).unwrap();
    assert_eq!(r.trace.last().unwrap().best, 1.0 - r.final_metrics.f_con);
}

#[test]
fn offline_without_imperfections_matches_ideal() {
    let task = bsa_training_set().unwrap();
    let arch = Architecture::new(2, PI, ImperfectionModel::ideal());
    let res = train_offline(&arch, &task, ObjectiveKind::Unconditional, &OptimizerConfig::default(), 5).unwrap();
    assert_eq!(res.realizations.len(), 5);
    for r in &res.realizations {
        assert!((r.f_unc - res.ideal.final_metrics.f_unc).abs() < 1e-14);
    }
}

#[test]
fn offline_keeps_parameters() {
    let task = bsa_training_set().unwrap();
    let arch = Architecture::new(2, PI / 4.0, ImperfectionModel::realistic(0.3));
    let params = random_params(32, 4);
    let before = params.clone();
    let a = evaluate_offline(&params, &arch, &task, &[1, 2, 3]).unwrap();
    let b = evaluate_offline(&params, &arch, &task, &[1, 2, 3]).unwrap();
    assert_eq!(params, before);
    assert_eq!(a, b);
}

#[test]
fn loss_limit_without_loss_is_ideal_fidelity() {
    let task = bsa_training_set().unwrap();
    let arch = Architecture::new(2, PI, ImperfectionModel::realistic(0.0));
    let lim = loss_limit(&arch, &task, ObjectiveKind::Unconditional, &OptimizerConfig::default()).unwrap();
    assert_eq!(lim.f_unc, lim.ideal_f_unc);
    assert!(lim.f_unc > 1.0 - 1e-3);
}

#[test]
fn loss_limit_matches_closed_form() {
    let task = bsa_training_set().unwrap();
    let cfg = OptimizerConfig::default();
    let ideal = train_ideal(&Architecture::new(2, PI, ImperfectionModel::ideal()), &task, ObjectiveKind::Unconditional, &cfg, 10)
        .unwrap();
    for alpha in [0.03, 0.3, 1.0] {
        let arch = Architecture::new(2, PI, ImperfectionModel::realistic(alpha));
        let lim = loss_limit_of(&ideal.final_params, ideal.final_metrics.f_unc, &arch, &task).unwrap();
        let closed = loss_limit_closed_form(lim.ideal_f_unc, lim.layer_transmission, 2, 2);
        assert!((lim.f_unc - closed).abs() < 1e-12);
    }
}

#[test]
fn fredkin_reference_points() {
    assert!((fredkin_bsa_fidelity(PI) - 1.0).abs() < 1e-12);
    // varphi = 0: U = H x I, whose first row is (1, 0, 1, 0)/sqrt2 etc.;
    // each Bell state then reaches its target with probability 1/4 or 0.
    let u = fredkin_bsa_unitary(0.0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let expect = [[r, 0.0, r, 0.0], [0.0, r, 0.0, r], [r, 0.0, -r, 0.0], [0.0, r, 0.0, -r]];
    for i in 0..4 {
        for j in 0..4 {
            assert!((u[[i, j]].re - expect[i][j]).abs() < 1e-15 && u[[i, j]].im.abs() < 1e-15);
        }
    }
    assert!((fredkin_bsa_fidelity(0.0) - 0.25).abs() < 1e-14);
    let grid: Vec<f64> = (0..100).map(|k| fredkin_bsa_fidelity(PI * k as f64 / 99.0)).collect();
    assert!(grid.windows(2).all(|w| w[1] >= w[0] - 1e-15));
    for k in 0..50 {
        let x = 0.13 * k as f64;
        assert!((fredkin_bsa_fidelity(x) - fredkin_bsa_fidelity(2.0 * PI - x)).abs() < 1e-12);
    }
}

#[test]
fn series_rates() {
    for (f, a, b) in [(0.9, 3, 4), (0.5, 1, 9), (0.97, 5, 5)] {
        let lhs = series_success_rate(f, a + b).unwrap();
        let rhs = series_success_rate(f, a).unwrap() * series_success_rate(f, b).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);
    }
    assert_eq!(linear_optical_bound(), 0.5);
}
