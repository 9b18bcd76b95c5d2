use ddn_core::sim::{estimate_errors, run_wof_trial, Hypothesis, NetworkConfig, Protocol, System};
use ddn_core::{consensus_pf, FusionRule, GaussianShiftModel};

#[test]
fn minimax_sensor_errors_are_symmetric() {
    let model = GaussianShiftModel::from_theta(0.3).unwrap();
    let cfg = NetworkConfig::ring(1, 11, 100_000).unwrap();
    let s = estimate_errors(&model, &cfg, System::Wof).unwrap();
    assert!((s.est_pf - s.est_pm).abs() <= 3.0 * (s.stderr_pf + s.stderr_pm), "{s:?}");
}

#[test]
fn even_network_uses_tie_coin() {
    let theta = 0.25;
    let model = GaussianShiftModel::from_theta(theta).unwrap();
    let cfg = NetworkConfig::ring(4, 5, 50_000).unwrap();
    let s = estimate_errors(&model, &cfg, System::Wof).unwrap();
    let want = consensus_pf(4, theta).unwrap();
    assert!((s.est_pf - want).abs() <= 4.0 * s.stderr_pf, "{s:?} vs {want}");
    assert!((s.est_pm - want).abs() <= 4.0 * s.stderr_pm, "{s:?} vs {want}");
}

#[test]
fn protocols_agree_trial_by_trial() {
    let model = GaussianShiftModel::from_theta(0.2).unwrap();
    let local = NetworkConfig::ring(7, 99, 1).unwrap();
    let flood = local.clone().with_protocol(Protocol::VoteFlooding);
    for i in 0..2000 {
        for h in [Hypothesis::H0, Hypothesis::H1] {
            let a = run_wof_trial(&model, &local, h, i);
            let b = run_wof_trial(&model, &flood, h, i);
            assert_eq!(a.decision, b.decision);
            assert!(!b.fallback);
        }
    }
}

#[test]
fn mismatched_rule_is_a_config_error() {
    let model = GaussianShiftModel::from_theta(0.2).unwrap();
    let cfg = NetworkConfig::ring(3, 1, 10).unwrap();
    let rule = FusionRule::counting(5, 0).unwrap();
    assert!(estimate_errors(&model, &cfg, System::Wf(rule)).is_err());
}
