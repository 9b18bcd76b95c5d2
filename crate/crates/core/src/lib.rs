//! Minimax decentralized detection with identical sensors.
//!
//! Sensors each run a likelihood-ratio test whose false-alarm and miss
//! probabilities are both `theta`, the choice that is robust to an unknown
//! prior. This crate evaluates what that robustness costs: for one sensor, for
//! a network that fuses by majority consensus, and for a fusion center that
//! may use any counting rule. A seeded Monte Carlo simulator checks the
//! closed forms.

pub mod binom;
pub mod error;
pub mod fusion;
pub mod model;
pub mod oracle;
pub mod pbpo;
pub mod scalar;
pub mod sim;
pub mod single;
pub mod verify;

pub use binom::{
    binom_cdf, binom_pmf, binom_tail_ge, consensus_error, consensus_pf, ln_binom_tail_ge, ln_consensus_error,
    majority_cdf, FusionRule, OperatingPoint,
};
pub use error::{DdnError, Result};
pub use fusion::{
    equivalent_count_interval, equivalent_sensor_count, error_gap, h_map, intersect_l1, intersect_l2, max_wf_loss,
    nonidentical_product_check, pf_fusion, pm_fusion, scan_thresholds, sup_wf_loss, wf_optimal_error, FusionMapQuery,
    Intersection, WfLossReport,
};
pub use model::{GaussianShiftModel, ObservationModel};
pub use pbpo::{check_prop1, pbpo_thresholds, risk_two_sensor, CostTensor2, CouplingDensity, PbpoSolution, RiskParams};
pub use sim::{estimate_errors, run_wf_trial, run_wof_trial, Hypothesis, NetworkConfig, Protocol, System, Topology, TrialStats};
pub use single::{
    butterfly_area, max_single_loss, multi_loss, multi_loss_inf, multi_loss_report, optimize_multi_loss_x, prob_zero_loss, sup_single_loss,
    theta_hat, ButterflyRegion, LinePosition, LossReport,
};
