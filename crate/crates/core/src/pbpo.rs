//! Two-sensor person-by-person optimal (PBPO) threshold design and the
//! robustness criterion for identical sensors under consensus fusion.
//!
//! Costs `C[i1][i2][j]` are paid for local decisions `(i1, i2)` under `H_j`.
//! Each sensor's likelihood-ratio threshold depends on the other sensor's
//! rule through the coupling costs `c_b` and `c_d`; when both vanish the two
//! thresholds decouple and coincide.

use serde::{Deserialize, Serialize};

use crate::binom::{consensus_pf, OperatingPoint};
use crate::error::{check_odd, check_prob, DdnError, Result};
use crate::model::GaussianShiftModel;

pub const PBPO_TOL: f64 = 1e-10;
pub const PBPO_MAX_ITER: usize = 10_000;
/// Tolerance of the system-level `P_F = P_M` check.
pub const ROBUST_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTensor2 {
    /// `c[i1][i2][j]`.
    pub c: [[[f64; 2]; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedCosts {
    pub c_a: f64,
    pub c_b: f64,
    pub c_c: f64,
    pub c_d: f64,
}

impl CostTensor2 {
    pub fn new(c: [[[f64; 2]; 2]; 2]) -> Self {
        Self { c }
    }

    pub fn zero() -> Self {
        Self::new([[[0.0; 2]; 2]; 2])
    }

    /// Sum of the two sensors' own decision errors: `[i1 != j] + [i2 != j]`.
    pub fn minimum_error() -> Self {
        let mut c = [[[0.0; 2]; 2]; 2];
        for (i1, plane) in c.iter_mut().enumerate() {
            for (i2, row) in plane.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (i1 != j) as u8 as f64 + (i2 != j) as u8 as f64;
                }
            }
        }
        Self::new(c)
    }

    /// Unit cost whenever the counting rule "more than `k` alarms" errs.
    pub fn fused_error(k: u8) -> Self {
        let mut c = [[[0.0; 2]; 2]; 2];
        for (i1, plane) in c.iter_mut().enumerate() {
            for (i2, row) in plane.iter_mut().enumerate() {
                let fused = (i1 + i2) as u8 > k;
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (fused != (j == 1)) as u8 as f64;
                }
            }
        }
        Self::new(c)
    }

    pub fn at(&self, i1: usize, i2: usize, j: usize) -> f64 {
        self.c[i1][i2][j]
    }

    pub fn derived(&self) -> DerivedCosts {
        let c = |i1, i2, j| self.at(i1, i2, j);
        DerivedCosts {
            c_a: c(1, 1, 0) - c(0, 1, 0),
            c_b: c(1, 0, 0) - c(0, 0, 0) + c(0, 1, 0) - c(1, 1, 0),
            c_c: c(0, 1, 1) - c(1, 1, 1),
            c_d: c(0, 0, 1) - c(1, 0, 1) + c(1, 1, 1) - c(0, 1, 1),
        }
    }

    /// Costs swapped between the sensors: `c'[i1][i2][j] = c[i2][i1][j]`.
    pub fn transposed(&self) -> Self {
        let mut c = [[[0.0; 2]; 2]; 2];
        for (i1, plane) in c.iter_mut().enumerate() {
            for (i2, row) in plane.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.c[i2][i1][j];
                }
            }
        }
        Self::new(c)
    }
}

/// True iff the coupling costs vanish, i.e. the PBPO rules decouple.
pub fn is_decoupling(costs: &CostTensor2) -> bool {
    let d = costs.derived();
    d.c_b == 0.0 && d.c_d == 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pi0: f64,
}

impl RiskParams {
    pub fn new(pi0: f64) -> Result<Self> {
        check_prob("pi0", pi0)?;
        Ok(Self { pi0 })
    }

    pub fn pi0(&self) -> f64 {
        self.pi0
    }

    pub fn pi1(&self) -> f64 {
        1.0 - self.pi0
    }

    fn prior(&self, j: usize) -> f64 {
        if j == 0 {
            self.pi0()
        } else {
            self.pi1()
        }
    }
}

/// Conditional joint decision probabilities `p[i1][i2][j] = P_j(φ1 = i1, φ2 = i2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDecisions {
    pub p: [[[f64; 2]; 2]; 2],
}

impl JointDecisions {
    /// Conditionally independent sensors at the given operating points.
    pub fn independent(s1: OperatingPoint, s2: OperatingPoint) -> Self {
        let marginal = |s: OperatingPoint, i: usize, j: usize| match (i, j) {
            (1, 0) => s.p_f,
            (0, 0) => 1.0 - s.p_f,
            (0, 1) => s.p_m,
            _ => 1.0 - s.p_m,
        };
        let mut p = [[[0.0; 2]; 2]; 2];
        for (i1, plane) in p.iter_mut().enumerate() {
            for (i2, row) in plane.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = marginal(s1, i1, j) * marginal(s2, i2, j);
                }
            }
        }
        Self { p }
    }

    fn check(&self) -> Result<()> {
        for j in 0..2 {
            let mut total = 0.0;
            for i1 in 0..2 {
                for i2 in 0..2 {
                    let v = self.p[i1][i2][j];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(DdnError::Contract(format!(
                            "joint probability P_{j}({i1},{i2}) = {v} outside [0, 1]"
                        )));
                    }
                    total += v;
                }
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(DdnError::Contract(format!(
                    "joint decision probabilities under H{j} sum to {total}, not 1"
                )));
            }
        }
        Ok(())
    }
}

/// Bayes risk `Σ π_j C[i1][i2][j] P_j(i1, i2)`.
pub fn risk_two_sensor(costs: &CostTensor2, priors: RiskParams, joint: &JointDecisions) -> Result<f64> {
    joint.check()?;
    let mut r = 0.0;
    for i1 in 0..2 {
        for i2 in 0..2 {
            for j in 0..2 {
                r += priors.prior(j) * costs.at(i1, i2, j) * joint.p[i1][i2][j];
            }
        }
    }
    Ok(r)
}

/// Which conditional density weights the coupling term of the denominator.
///
/// `AsPrinted` weights both numerator and denominator coupling terms with the
/// `H0` density, so the other sensor enters through `P0(φ = 0)` twice.
/// `Alternative` conditions the denominator on `H1` instead, where the other
/// sensor enters through its miss probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CouplingDensity {
    #[default]
    AsPrinted,
    Alternative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbpoSolution {
    /// Likelihood-ratio thresholds of sensors 1 and 2.
    pub t1: f64,
    pub t2: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out; `t1`, `t2` are the last iterate.
    pub converged: bool,
}

/// Threshold of one sensor given the other sensor's threshold.
fn coupled_threshold(
    d: &DerivedCosts,
    priors: RiskParams,
    model: &GaussianShiftModel,
    density: CouplingDensity,
    other: f64,
) -> Result<f64> {
    let op = model.point_at_ratio(other)?;
    let other_zero_h0 = 1.0 - op.p_f;
    let other_zero_den = match density {
        CouplingDensity::AsPrinted => other_zero_h0,
        CouplingDensity::Alternative => op.p_m,
    };
    let num = priors.pi0() * (d.c_a + other_zero_h0 * d.c_b);
    let den = priors.pi1() * (d.c_c + other_zero_den * d.c_d);
    let ratio = num / den;
    if ratio > 0.0 && ratio.is_finite() {
        Ok(ratio)
    } else {
        Err(DdnError::InfeasibleCosts { ratio })
    }
}

/// Solve the coupled PBPO threshold pair by alternating (Gauss–Seidel)
/// fixed-point updates, starting from the coupling-free threshold
/// `π0 c_a / (π1 c_c)`.
pub fn pbpo_thresholds(
    costs: &CostTensor2,
    priors: RiskParams,
    model: &GaussianShiftModel,
    density: CouplingDensity,
) -> Result<PbpoSolution> {
    let d1 = costs.derived();
    let d2 = costs.transposed().derived();
    let start = priors.pi0() * d1.c_a / (priors.pi1() * d1.c_c);
    let start = if start > 0.0 && start.is_finite() { start } else { 1.0 };
    let (mut t1, mut t2) = (start, start);
    for it in 1..=PBPO_MAX_ITER {
        let n1 = coupled_threshold(&d1, priors, model, density, t2)?;
        let n2 = coupled_threshold(&d2, priors, model, density, n1)?;
        let change = (n1 - t1).abs().max((n2 - t2).abs());
        t1 = n1;
        t2 = n2;
        if change < PBPO_TOL {
            return Ok(PbpoSolution {
                t1,
                t2,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(PbpoSolution {
        t1,
        t2,
        iterations: PBPO_MAX_ITER,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCheck {
    pub robust: bool,
    pub system: OperatingPoint,
}

/// System operating point of `K` identical sensors under majority fusion and
/// whether it satisfies `P_F = P_M`.
pub fn check_prop1(sensors: u64, local: OperatingPoint) -> Result<RobustnessCheck> {
    check_odd(sensors)?;
    check_prob("p_f", local.p_f)?;
    check_prob("p_m", local.p_m)?;
    // the miss side is the same polynomial evaluated at the local miss probability
    let system = OperatingPoint {
        p_f: consensus_pf(sensors, local.p_f)?,
        p_m: consensus_pf(sensors, local.p_m)?,
    };
    Ok(RobustnessCheck {
        robust: (system.p_f - system.p_m).abs() <= ROBUST_TOL,
        system,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binom::consensus_error;
    use approx::assert_abs_diff_eq;

    fn op(p_f: f64, p_m: f64) -> OperatingPoint {
        OperatingPoint { p_f, p_m }
    }

    /// Costs with `c_a = -2`, `c_c = -1` and no coupling.
    // each sensor pays 2 for a correct "0" under H0 and 1 for a correct "1" under H1
    fn non_monotone_costs() -> CostTensor2 {
        let u = |i: usize, j: usize| match (i, j) {
            (0, 0) => 2.0,
            (1, 1) => 1.0,
            _ => 0.0,
        };
        let mut c = [[[0.0; 2]; 2]; 2];
        for i1 in 0..2 {
            for i2 in 0..2 {
                for j in 0..2 {
                    c[i1][i2][j] = u(i1, j) + u(i2, j);
                }
            }
        }
        CostTensor2::new(c)
    }

    #[test]
    fn risk_examples() {
        let joint = JointDecisions::independent(op(0.2, 0.2), op(0.2, 0.2));
        let half = RiskParams::new(0.5).unwrap();
        assert_eq!(risk_two_sensor(&CostTensor2::zero(), half, &joint).unwrap(), 0.0);
        // OR-fused error: 4-outcome enumeration per hypothesis
        let r = risk_two_sensor(&CostTensor2::fused_error(0), half, &joint).unwrap();
        assert_abs_diff_eq!(r, 0.5 * (1.0 - 0.8f64.powi(2)) + 0.5 * 0.2f64.powi(2), epsilon = 1e-15);
        // pi0 = 1 keeps only the H0 terms
        let only_h0 = RiskParams::new(1.0).unwrap();
        let mut costs = CostTensor2::fused_error(0);
        for plane in costs.c.iter_mut() {
            for row in plane.iter_mut() {
                row[1] = 1e6;
            }
        }
        let r = risk_two_sensor(&costs, only_h0, &joint).unwrap();
        assert_abs_diff_eq!(r, 1.0 - 0.8f64.powi(2), epsilon = 1e-15);
    }

    #[test]
    fn risk_rejects_unnormalized_joint() {
        let mut joint = JointDecisions::independent(op(0.2, 0.2), op(0.1, 0.3));
        joint.p[0][0][1] += 1e-6;
        let err = risk_two_sensor(&CostTensor2::minimum_error(), RiskParams::new(0.5).unwrap(), &joint);
        assert!(matches!(err, Err(DdnError::Contract(_))));
    }

    #[test]
    fn decoupling_examples() {
        let mut c = [[[0.0; 2]; 2]; 2];
        c[1][1][0] = 3.0;
        c[0][1][0] = 3.0;
        c[1][0][0] = 0.5;
        c[0][0][0] = 0.5;
        c[0][1][1] = 2.0;
        c[1][1][1] = 2.0;
        c[0][0][1] = 7.0;
        c[1][0][1] = 7.0;
        assert!(is_decoupling(&CostTensor2::new(c)));
        assert!(is_decoupling(&CostTensor2::minimum_error()));
        let d = CostTensor2::minimum_error().derived();
        assert_eq!((d.c_a, d.c_b, d.c_c, d.c_d), (1.0, 0.0, 1.0, 0.0));
        let mut c = CostTensor2::zero();
        c.c[1][0][0] = 1.0;
        assert_eq!(c.derived().c_b, 1.0);
        assert!(!is_decoupling(&c));
    }

    #[test]
    fn decoupled_thresholds_are_model_independent() {
        let priors = RiskParams::new(0.4).unwrap();
        let costs = CostTensor2::minimum_error();
        let expected = 0.4 * 1.0 / (0.6 * 1.0);
        for theta in [0.05, 0.2, 0.35] {
            let model = GaussianShiftModel::from_theta(theta).unwrap();
            for density in [CouplingDensity::AsPrinted, CouplingDensity::Alternative] {
                let s = pbpo_thresholds(&costs, priors, &model, density).unwrap();
                assert!(s.converged && s.iterations <= 2);
                assert_eq!(s.t1, expected);
                assert_eq!(s.t2, expected);
            }
        }
    }

    #[test]
    fn non_monotone_costs_give_minimax_rules() {
        let costs = non_monotone_costs();
        let d = costs.derived();
        assert_eq!((d.c_a, d.c_b, d.c_c, d.c_d), (-2.0, 0.0, -1.0, 0.0));
        // threshold 2 pi0 / pi1 = 1, the minimax ratio of the shift family
        let priors = RiskParams::new(1.0 / 3.0).unwrap();
        let model = GaussianShiftModel::from_theta(0.2).unwrap();
        let s = pbpo_thresholds(&costs, priors, &model, CouplingDensity::AsPrinted).unwrap();
        assert!(s.converged);
        let p1 = model.point_at_ratio(s.t1).unwrap();
        let p2 = model.point_at_ratio(s.t2).unwrap();
        assert!((p1.p_f - p1.p_m).abs() < 1e-12);
        assert!((p2.p_f - 0.2).abs() < 1e-12);
    }

    #[test]
    fn symmetric_coupled_costs_give_equal_thresholds() {
        let model = GaussianShiftModel::from_theta(0.15).unwrap();
        let priors = RiskParams::new(0.5).unwrap();
        for k in [0u8, 1] {
            for density in [CouplingDensity::AsPrinted, CouplingDensity::Alternative] {
                let s = pbpo_thresholds(&CostTensor2::fused_error(k), priors, &model, density).unwrap();
                assert!(s.converged, "k={k} {density:?}");
                assert!((s.t1 - s.t2).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn infeasible_costs_rejected() {
        let model = GaussianShiftModel::from_theta(0.2).unwrap();
        let priors = RiskParams::new(0.5).unwrap();
        let mut c = CostTensor2::minimum_error();
        c.c[1][1][0] = -5.0; // c_a < 0 while c_c > 0
        c.c[1][0][0] = -6.0; // keeps c_b = 0
        assert!(matches!(
            pbpo_thresholds(&c, priors, &model, CouplingDensity::AsPrinted),
            Err(DdnError::InfeasibleCosts { .. })
        ));
    }

    #[test]
    fn minimum_error_risk_minimized_at_pbpo_threshold() {
        let priors = RiskParams::new(0.35).unwrap();
        let model = GaussianShiftModel::from_theta(0.2).unwrap();
        let costs = CostTensor2::minimum_error();
        let s = pbpo_thresholds(&costs, priors, &model, CouplingDensity::AsPrinted).unwrap();
        let step = 0.001;
        let mut best = (0.0, f64::INFINITY);
        for i in 1..5000 {
            let ln_t = -2.5 + step * i as f64;
            let pt = model.point_at_ratio(ln_t.exp()).unwrap();
            let r = risk_two_sensor(&costs, priors, &JointDecisions::independent(pt, pt)).unwrap();
            if r < best.1 {
                best = (ln_t, r);
            }
        }
        assert!((best.0 - s.t1.ln()).abs() <= step);
    }

    #[test]
    fn prop1_examples() {
        let r = check_prop1(5, op(0.2, 0.2)).unwrap();
        assert!(r.robust);
        let ce = consensus_error(5, 0.2).unwrap();
        assert_eq!(r.system.p_f, ce);
        assert_eq!(r.system.p_m, ce);
        assert!(!check_prop1(5, op(0.1, 0.3)).unwrap().robust);
        let r = check_prop1(1, op(0.3, 0.3)).unwrap();
        assert_eq!(r.system, op(0.3, 0.3));
        assert!(check_prop1(4, op(0.3, 0.3)).is_err());
    }
}
