//! Butterfly uncertainty region and the loss of the robust rule against the
//! minimum-error rule, for one sensor and for a consensus network.
//!
//! A likelihood-ratio test whose false-alarm and miss probabilities are both
//! `theta` has a convex ROC curve through `(theta, theta)`. Convexity pins that
//! curve between two lines through the apex:
//!
//! * `l1`: `p_m = theta_hat (1 - p_f)`, through `(1, 0)`,
//! * `l2`: its mirror image `p_f = theta_hat (1 - p_m)`, through `(0, 1)`,
//!
//! with `theta_hat = theta / (1 - theta)`. The region between them is two
//! triangles meeting at the apex.

use serde::{Deserialize, Serialize};

use crate::binom::{consensus_pf, OperatingPoint};
use crate::error::{check_odd, check_prob, check_theta, DdnError, Result};
use crate::scalar::{bisect_root, grid_bracket_max, maximize, GRID_POINTS};

/// Upper end of the finite search over positions on `l1`.
pub const X_MAX: f64 = 1e6;

const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterflyRegion {
    theta: f64,
}

impl ButterflyRegion {
    pub fn new(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn theta_hat(&self) -> f64 {
        theta_hat(self.theta)
    }

    pub fn apex(&self) -> OperatingPoint {
        OperatingPoint {
            p_f: self.theta,
            p_m: self.theta,
        }
    }

    /// `l1(p_f) = theta_hat (1 - p_f)`.
    pub fn line_l1(&self, p_f: f64) -> Result<f64> {
        check_prob("p_f", p_f)?;
        Ok(self.theta_hat() * (1.0 - p_f))
    }

    /// `l2 = l1⁻¹`: `p_m = 1 - p_f / theta_hat`, defined while it stays in
    /// the unit square (`p_f <= theta_hat`).
    pub fn line_l2(&self, p_f: f64) -> Result<Option<f64>> {
        check_prob("p_f", p_f)?;
        let th = self.theta_hat();
        if p_f > th {
            return Ok(None);
        }
        Ok(Some((1.0 - p_f / th).max(0.0)))
    }

    /// Closed butterfly: on or between `l1` and `l2` inside the unit square.
    pub fn contains(&self, pt: OperatingPoint) -> bool {
        if !(0.0..=1.0).contains(&pt.p_f) || !(0.0..=1.0).contains(&pt.p_m) {
            return false;
        }
        let th = self.theta_hat();
        let d1 = pt.p_m - th * (1.0 - pt.p_f);
        let d2 = pt.p_m - (1.0 - pt.p_f / th);
        d1.min(d2) <= BOUNDARY_TOL && d1.max(d2) >= -BOUNDARY_TOL
    }

    /// Points of the butterfly whose average error is below `theta`: there
    /// the minimum-error rule strictly beats the robust one.
    pub fn in_gain_region(&self, pt: OperatingPoint) -> bool {
        self.contains(pt) && pt.average_error() < self.theta
    }

    pub fn area(&self) -> f64 {
        butterfly_area_unchecked(self.theta)
    }
}

pub fn theta_hat(theta: f64) -> f64 {
    theta / (1.0 - theta)
}

pub fn butterfly_contains(region: &ButterflyRegion, pt: OperatingPoint) -> bool {
    region.contains(pt)
}

/// Worst-case loss of the robust rule for one sensor:
/// `theta (1 - 2 theta) / (2 (1 - theta))`.
pub fn sup_single_loss(theta: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&theta) {
        return Err(DdnError::Domain {
            name: "theta",
            value: theta,
            domain: "[0, 1/2]",
        });
    }
    Ok(sup_single_loss_unchecked(theta))
}

fn sup_single_loss_unchecked(theta: f64) -> f64 {
    0.5 * theta * (1.0 - 2.0 * theta) / (1.0 - theta)
}

/// Derivative of the single-sensor loss: `(1 - 4θ + 2θ²) / (2 (1 - θ)²)`.
fn sup_single_loss_slope(theta: f64) -> f64 {
    (1.0 - 4.0 * theta + 2.0 * theta * theta) / (2.0 * (1.0 - theta).powi(2))
}

/// Maximum over `theta ∈ [0, 1/2]` of [`sup_single_loss`].
///
/// The peak is bracketed on a grid and then located by bisection on the sign
/// of the analytic slope, which pins the argument to a few ulps; a value-only
/// search cannot resolve the argument of a smooth maximum much below `1e-8`.
pub fn max_single_loss() -> (f64, f64) {
    let (lo, hi, _, _) = grid_bracket_max(sup_single_loss_unchecked, 0.0, 0.5, GRID_POINTS);
    let theta = bisect_root(sup_single_loss_slope, lo, hi);
    (theta, sup_single_loss_unchecked(theta))
}

/// Area of the butterfly region: `theta (1 - 2 theta) / (1 - theta)`.
pub fn butterfly_area(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(butterfly_area_unchecked(theta))
}

fn butterfly_area_unchecked(theta: f64) -> f64 {
    theta * (1.0 - 2.0 * theta) / (1.0 - theta)
}

/// Probability that the robust rule is already optimal when the operating
/// point is uniform on the butterfly: `1 - theta`.
pub fn prob_zero_loss(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(1.0 - theta)
}

/// Position of the minimum-error operating point on `l1`.
///
/// `Finite(x)` maps to `(theta / x, theta (x - theta) / (x (1 - theta)))`;
/// `Infinite` is the `l1` endpoint `(0, theta_hat)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinePosition {
    Finite(f64),
    Infinite,
}

impl LinePosition {
    pub fn point(&self, theta: f64) -> OperatingPoint {
        match *self {
            LinePosition::Finite(x) if x == 1.0 => OperatingPoint {
                p_f: theta,
                p_m: theta,
            },
            LinePosition::Finite(x) => OperatingPoint {
                p_f: theta / x,
                p_m: theta * (x - theta) / (x * (1.0 - theta)),
            },
            LinePosition::Infinite => OperatingPoint {
                p_f: 0.0,
                p_m: theta_hat(theta),
            },
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            LinePosition::Finite(x) if !(x >= 1.0 && x.is_finite()) => Err(DdnError::Domain {
                name: "x",
                value: x,
                domain: "[1, inf]",
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    /// `robust_error - optimum_error`.
    pub loss: f64,
    pub optimum_point: OperatingPoint,
    pub robust_error: f64,
    pub optimum_error: f64,
}

/// Loss of a `K`-sensor consensus network when every sensor runs the robust
/// rule instead of the rule at `position` on `l1`.
pub fn multi_loss_report(sensors: u64, theta: f64, position: LinePosition) -> Result<LossReport> {
    check_odd(sensors)?;
    check_theta(theta)?;
    position.check()?;
    let pt = position.point(theta);
    let robust_error = consensus_pf(sensors, theta)?;
    // both system error probabilities share the consensus polynomial
    let optimum_error = 0.5 * (consensus_pf(sensors, pt.p_f)? + consensus_pf(sensors, pt.p_m)?);
    Ok(LossReport {
        loss: robust_error - optimum_error,
        optimum_point: pt,
        robust_error,
        optimum_error,
    })
}

pub fn multi_loss(sensors: u64, theta: f64, position: LinePosition) -> Result<f64> {
    Ok(multi_loss_report(sensors, theta, position)?.loss)
}

/// Loss at the `l1` endpoint:
/// `P(Bin(K, θ) ≥ ⌈K/2⌉) - P(Bin(K, θ̂) ≥ ⌈K/2⌉) / 2`.
pub fn multi_loss_inf(sensors: u64, theta: f64) -> Result<f64> {
    multi_loss(sensors, theta, LinePosition::Infinite)
}

/// Maximize the consensus loss over the position on `l1`.
///
/// Finite positions are searched in `ln x` over `[1, X_MAX]`; the endpoint is
/// evaluated separately and wins only if strictly better.
pub fn optimize_multi_loss_x(sensors: u64, theta: f64) -> Result<(LinePosition, f64)> {
    check_odd(sensors)?;
    check_theta(theta)?;
    let objective = |u: f64| {
        multi_loss(sensors, theta, LinePosition::Finite(u.exp().max(1.0))).unwrap_or(f64::NEG_INFINITY)
    };
    let (u, finite_best) = maximize(objective, 0.0, X_MAX.ln());
    let at_inf = multi_loss_inf(sensors, theta)?;
    if at_inf > finite_best {
        Ok((LinePosition::Infinite, at_inf))
    } else {
        Ok((LinePosition::Finite(u.exp().max(1.0)), finite_best))
    }
}

/// Smallest `theta` at which the endpoint loss [`multi_loss_inf`] changes
/// sign, located on a `1e-3` grid and refined by bisection. `None` if the
/// sign never changes on `(0, 1/2)`.
pub fn multi_loss_inf_crossover(sensors: u64) -> Result<Option<f64>> {
    check_odd(sensors)?;
    let f = |t: f64| multi_loss_inf(sensors, t).unwrap();
    let mut prev_t = 1e-3;
    let mut prev = f(prev_t);
    for i in 2..500 {
        let t = i as f64 * 1e-3;
        let v = f(t);
        if v.signum() != prev.signum() {
            return Ok(Some(bisect_root(f, prev_t, t)));
        }
        prev_t = t;
        prev = v;
    }
    Ok(None)
}

/// Single-sensor report at the `l1` endpoint.
pub fn single_loss_report(theta: f64) -> Result<LossReport> {
    multi_loss_report(1, theta, LinePosition::Infinite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binom::consensus_error;
    use approx::assert_abs_diff_eq;

    #[test]
    fn l1_examples() {
        let r = ButterflyRegion::new(0.309).unwrap();
        assert_abs_diff_eq!(r.line_l1(0.309).unwrap(), 0.309, epsilon = 1e-15);
        let r = ButterflyRegion::new(0.25).unwrap();
        assert_abs_diff_eq!(r.line_l1(0.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.line_l1(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(r.line_l2(0.25).unwrap().unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(r.line_l2(0.5).unwrap(), None);
    }

    #[test]
    fn contains_examples() {
        let r = ButterflyRegion::new(0.3).unwrap();
        assert!(r.contains(OperatingPoint { p_f: 0.3, p_m: 0.3 }));
        assert!(r.contains(OperatingPoint { p_f: 0.0, p_m: 3.0 / 7.0 }));
        assert!(!r.contains(OperatingPoint { p_f: 0.5, p_m: 0.5 }));
        assert!(r.contains(OperatingPoint { p_f: 0.0, p_m: 1.0 }));
        assert!(!r.contains(OperatingPoint { p_f: 0.0, p_m: 0.2 }));
    }

    #[test]
    fn line_points_are_inside() {
        for t in 1..50 {
            let r = ButterflyRegion::new(t as f64 / 100.0).unwrap();
            for i in 0..=100 {
                let pf = i as f64 / 100.0;
                let pm = r.line_l1(pf).unwrap();
                assert!(r.contains(OperatingPoint { p_f: pf, p_m: pm }));
                if let Some(pm) = r.line_l2(pf).unwrap() {
                    assert!(r.contains(OperatingPoint { p_f: pf, p_m: pm }));
                }
            }
        }
    }

    #[test]
    fn sup_loss_examples() {
        assert_eq!(sup_single_loss(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(sup_single_loss(0.25).unwrap(), 1.0 / 12.0, epsilon = 1e-16);
        assert_eq!(sup_single_loss(0.5).unwrap(), 0.0);
        assert!(sup_single_loss(0.6).is_err());
        // theta minus the average error at the l1 endpoint
        for i in 0..=50 {
            let t = i as f64 / 100.0;
            let endpoint_error = t / (2.0 * (1.0 - t));
            assert_abs_diff_eq!(sup_single_loss(t).unwrap(), t - endpoint_error, epsilon = 1e-15);
        }
    }

    #[test]
    fn sup_loss_positive_inside() {
        for i in 1..500 {
            assert!(sup_single_loss(i as f64 / 1000.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn max_single_loss_closed_form() {
        let (t, l) = max_single_loss();
        assert!((l - (3.0 - 2.0 * 2f64.sqrt()) / 2.0).abs() < 1e-12);
        assert!((t - (1.0 - 2f64.sqrt() / 2.0)).abs() < 1e-12);
        assert_eq!(sup_single_loss(t).unwrap(), l);
    }

    #[test]
    fn area_and_point_mass() {
        assert_abs_diff_eq!(butterfly_area(0.25).unwrap(), 1.0 / 6.0, epsilon = 1e-16);
        assert!(butterfly_area(1e-9).unwrap() < 1e-8);
        assert_abs_diff_eq!(prob_zero_loss(0.3).unwrap(), 0.7, epsilon = 1e-16);
        assert!((prob_zero_loss(1e-12).unwrap() - 1.0).abs() < 1e-11);
        assert!(butterfly_area(0.5).is_err());
    }

    #[test]
    fn multi_loss_examples() {
        for k in [1u64, 3, 9, 51] {
            assert_eq!(multi_loss(k, 0.2, LinePosition::Finite(1.0)).unwrap(), 0.0);
        }
        assert_abs_diff_eq!(multi_loss_inf(1, 0.25).unwrap(), 1.0 / 12.0, epsilon = 1e-16);
        // 0.104 - 0.15625 / 2 with theta_hat = 1/4
        assert_abs_diff_eq!(multi_loss_inf(3, 0.2).unwrap(), 0.025_875, epsilon = 1e-15);
        assert!(multi_loss(3, 0.2, LinePosition::Finite(0.5)).is_err());
        assert!(multi_loss(4, 0.2, LinePosition::Infinite).is_err());
    }

    /// The endpoint loss written term by term as
    /// `Σ C(K,i) θ^i [(1-θ)^(K-i) - (1-θ)^(-K) (1-2θ)^(K-i) / 2]`.
    fn summand_form(k: u64, theta: f64) -> f64 {
        let mut total = 0.0;
        let mut c = 1.0f64;
        for i in 0..=k {
            if i > 0 {
                c = c * (k - i + 1) as f64 / i as f64;
            }
            if 2 * i > k {
                let a = (1.0 - theta).powi((k - i) as i32);
                let b = 0.5 * (1.0 - theta).powi(-(k as i32)) * (1.0 - 2.0 * theta).powi((k - i) as i32);
                total += c * theta.powi(i as i32) * (a - b);
            }
        }
        total
    }

    #[test]
    fn endpoint_loss_matches_summand_form() {
        for k in [1u64, 3, 5, 7, 11, 15] {
            for i in 1..50 {
                let t = i as f64 / 100.0;
                assert_abs_diff_eq!(multi_loss_inf(k, t).unwrap(), summand_form(k, t), epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn asymptotic_piecewise_limit() {
        assert!(multi_loss_inf(2001, 0.30).unwrap().abs() <= 1e-3);
        assert!((multi_loss_inf(2001, 0.40).unwrap() + 0.5).abs() <= 1e-3);
        assert!((multi_loss_inf(1001, 0.40).unwrap() + 0.5).abs() <= 1e-3);
    }

    #[test]
    fn optimized_loss_is_nonnegative() {
        for k in [1u64, 3, 5, 11, 51] {
            for i in 1..50 {
                let t = i as f64 / 100.0;
                let (_, l) = optimize_multi_loss_x(k, t).unwrap();
                assert!(l >= 0.0, "K={k} theta={t}");
            }
        }
    }

    #[test]
    fn optimizer_single_sensor_prefers_endpoint() {
        let t = 0.2929;
        let (pos, l) = optimize_multi_loss_x(1, t).unwrap();
        assert_eq!(pos, LinePosition::Infinite);
        assert_abs_diff_eq!(l, sup_single_loss(t).unwrap(), epsilon = 1e-15);
        assert!((l - 0.085_786_4).abs() < 1e-6);
    }

    #[test]
    fn optimizer_small_theta_loss_vanishes() {
        let (_, l) = optimize_multi_loss_x(5, 1e-6).unwrap();
        assert!(l < 1e-6);
    }

    #[test]
    fn optimizer_k51_finite_maximizer() {
        let (pos, l) = optimize_multi_loss_x(51, 0.2).unwrap();
        assert!(l >= 0.0);
        let x = match pos {
            LinePosition::Finite(x) => x,
            LinePosition::Infinite => panic!("expected a finite maximizer"),
        };
        // dense grid + local refine oracle over ln x
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=20_000 {
            let u = X_MAX.ln() * i as f64 / 20_000.0;
            let v = multi_loss(51, 0.2, LinePosition::Finite(u.exp())).unwrap();
            if v > best.1 {
                best = (u.exp(), v);
            }
        }
        assert!(l >= best.1 - 1e-12, "optimizer {l} below grid {}", best.1);
        assert!((x.ln() - best.0.ln()).abs() < 1e-3);
    }

    #[test]
    fn consensus_error_decay_rate_settles() {
        // ln P_e(K) / K over odd K; successive differences shrink monotonically
        let rate = |k: u64| consensus_error(k, 0.2).unwrap().ln() / k as f64;
        let mut prev_rate = rate(1);
        let mut prev_diff = f64::INFINITY;
        let mut k = 3;
        while k <= 501 {
            let r = rate(k);
            let d = (r - prev_rate).abs();
            assert!(d < prev_diff, "K={k}: {d} >= {prev_diff}");
            prev_diff = d;
            prev_rate = r;
            k += 2;
        }
        assert!(prev_diff < 1e-3);
    }
}
