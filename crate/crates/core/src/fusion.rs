//! Fusion-center counting rules for identical robust sensors.
//!
//! With threshold `k` the center declares `H1` when more than `k` of the `K`
//! sensors alarm. For a sensor-level point `(p_f, p_m)` the system errors are
//!
//! * `pf_fusion = P(Bin(K, p_f) >= k + 1)`
//! * `pm_fusion = P(Bin(K, p_m) >= K - k)`
//!
//! and the fused rule is robust when they are equal. [`h_map`] is the curve of
//! sensor points achieving that. Against a robust sensor pool with common
//! error `theta`, the best sensor point on that curve lies on one of the two
//! butterfly edges next to the apex, and the best threshold is `k = 0` (OR)
//! or, mirrored, `k = K - 1` (AND). The resulting system error is
//! `theta_hat^K / (1 + theta_hat^K)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binom::{binom_cdf, binom_tail_ge, consensus_pf, ln_binom_tail_ge, ln_consensus_error, ln_choose, OperatingPoint};
use crate::error::{check_odd, check_prob, check_sensors, check_theta, DdnError, Result};
use crate::scalar::{bisect_root, golden_section_max, GOLDEN_TOL, GRID_POINTS};
use crate::single::theta_hat;

/// Largest `K` for which [`max_wf_loss`] re-derives the optimum by scanning
/// every threshold.
pub const MAX_SCAN_SENSORS: u64 = 25;
/// Residual tolerance on `pf_fusion = pm_fusion` at a reported intersection.
pub const SET_CONDITION_TOL: f64 = 1e-10;
/// Tolerance used when comparing the threshold scan with the closed form.
pub const SCAN_TOL: f64 = 1e-10;

fn check_threshold(sensors: u64, k: u64) -> Result<()> {
    check_sensors(sensors)?;
    if k > sensors {
        return Err(DdnError::Threshold {
            sensors,
            k: k as i64,
            reason: "must lie in [0, K]",
        });
    }
    Ok(())
}

/// System false alarm of the counting rule: `1 - B(k; K, p_f)`.
pub fn pf_fusion(p_f: f64, sensors: u64, k: u64) -> Result<f64> {
    check_threshold(sensors, k)?;
    binom_tail_ge(sensors, k as i64 + 1, p_f)
}

/// System miss of the counting rule: `B(k; K, 1 - p_m)`, evaluated as the
/// upper tail of the miss count so that `1 - p_m` is never formed.
pub fn pm_fusion(p_m: f64, sensors: u64, k: u64) -> Result<f64> {
    check_threshold(sensors, k)?;
    binom_tail_ge(sensors, (sensors - k) as i64, p_m)
}

fn ln_pf_fusion(p_f: f64, sensors: u64, k: u64) -> f64 {
    ln_binom_tail_ge(sensors, k as i64 + 1, p_f).unwrap_or(f64::NAN)
}

fn ln_pm_fusion(p_m: f64, sensors: u64, k: u64) -> f64 {
    ln_binom_tail_ge(sensors, (sensors - k) as i64, p_m).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionMapQuery {
    pub sensors: u64,
    pub threshold: u64,
    pub p_f: f64,
}

impl FusionMapQuery {
    pub fn new(sensors: u64, threshold: u64, p_f: f64) -> Result<Self> {
        check_threshold(sensors, threshold)?;
        check_prob("p_f", p_f)?;
        Ok(Self {
            sensors,
            threshold,
            p_f,
        })
    }
}

/// The sensor miss probability that makes the fused rule robust at `p_f`.
///
/// `k = K` never fires, so no point other than none at all balances it; that
/// threshold is rejected.
pub fn h_map(q: FusionMapQuery) -> Result<f64> {
    let FusionMapQuery {
        sensors: n,
        threshold: k,
        p_f,
    } = FusionMapQuery::new(q.sensors, q.threshold, q.p_f)?;
    if k == n {
        return Err(DdnError::Threshold {
            sensors: n,
            k: k as i64,
            reason: "k = K never alarms, so no robust point exists",
        });
    }
    if p_f == 0.0 || p_f == 1.0 {
        return Ok(p_f);
    }
    let target = binom_tail_ge(n, k as i64 + 1, p_f)?;
    let m = n - k;
    let root = if target <= 0.5 {
        bisect_root(|pm| binom_tail_ge(n, m as i64, pm).unwrap() - target, 0.0, 1.0)
    } else {
        // match the complements, which are the small side here
        let lower = binom_cdf(k as i64, n, p_f)?;
        bisect_root(|pm| binom_cdf(m as i64 - 1, n, pm).unwrap() - lower, 0.0, 1.0)
    };
    Ok(root)
}

/// Which butterfly edge an intersection lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    /// `p_f < theta`, `p_m = theta_hat (1 - p_f)`.
    L1,
    /// `p_m < theta`, `p_f = theta_hat (1 - p_m)`.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub edge: Edge,
    /// One minus the coordinate that runs along the edge (`1 - p_f` on `l1`).
    pub x_m: f64,
    pub point: OperatingPoint,
    /// True when the map meets the edge only at the apex `(theta, theta)`.
    pub at_apex: bool,
}

impl Intersection {
    /// Fused error probability at the intersection.
    pub fn error(&self, sensors: u64, k: u64) -> Result<f64> {
        pf_fusion(self.point.p_f, sensors, k)
    }
}

/// Intersection of the robust fusion curve for threshold `k <= ⌊K/2⌋` with
/// the `l1` edge of the butterfly.
pub fn intersect_l1(sensors: u64, k: u64, theta: f64) -> Result<Intersection> {
    check_threshold(sensors, k)?;
    check_theta(theta)?;
    if 2 * k > sensors {
        return Err(DdnError::Threshold {
            sensors,
            k: k as i64,
            reason: "the l1 edge is only reached for k <= K/2",
        });
    }
    let th = theta_hat(theta);
    // increasing in p_f: the fused false alarm grows, the fused miss shrinks
    let residual = |pf: f64| ln_pf_fusion(pf, sensors, k) - ln_pm_fusion(th * (1.0 - pf), sensors, k);
    let at_apex = 2 * k + 1 == sensors;
    if at_apex {
        return Ok(apex(Edge::L1, theta));
    }
    if residual(theta) < 0.0 {
        return Err(DdnError::NoIntersection { sensors, k });
    }
    let pf = bisect_root(residual, 0.0, theta);
    Ok(Intersection {
        edge: Edge::L1,
        x_m: 1.0 - pf,
        point: OperatingPoint {
            p_f: pf,
            p_m: th * (1.0 - pf),
        },
        at_apex: false,
    })
}

/// Mirror of [`intersect_l1`] for thresholds `k >= ⌊K/2⌋` on the `l2` edge.
pub fn intersect_l2(sensors: u64, k: u64, theta: f64) -> Result<Intersection> {
    check_threshold(sensors, k)?;
    check_theta(theta)?;
    if k == sensors || 2 * k + 1 < sensors {
        return Err(DdnError::Threshold {
            sensors,
            k: k as i64,
            reason: "the l2 edge is only reached for K/2 - 1/2 <= k < K",
        });
    }
    if 2 * k + 1 == sensors {
        return Ok(apex(Edge::L2, theta));
    }
    let th = theta_hat(theta);
    let residual = |pm: f64| ln_pf_fusion(th * (1.0 - pm), sensors, k) - ln_pm_fusion(pm, sensors, k);
    if residual(theta) > 0.0 {
        return Err(DdnError::NoIntersection { sensors, k });
    }
    let pm = bisect_root(residual, 0.0, theta);
    Ok(Intersection {
        edge: Edge::L2,
        x_m: 1.0 - pm,
        point: OperatingPoint {
            p_f: th * (1.0 - pm),
            p_m: pm,
        },
        at_apex: false,
    })
}

fn apex(edge: Edge, theta: f64) -> Intersection {
    Intersection {
        edge,
        x_m: 1.0 - theta,
        point: OperatingPoint {
            p_f: theta,
            p_m: theta,
        },
        at_apex: true,
    }
}

/// The partial sums `f1`, `f2` of the set condition on `l1`:
/// `x^K = 1 / (theta_hat^K f1 + f2)` at `x = 1 - p_f`.
pub fn set_condition_sums(sensors: u64, k: u64, x: f64, theta_hat: f64) -> (f64, f64) {
    let a = (1.0 - x * theta_hat) / (x * theta_hat);
    let b = (1.0 - x) / x;
    let mut f1 = 1.0;
    let mut f2 = 1.0;
    for i in 1..=k {
        let c = ln_choose(sensors, i).exp();
        f1 += c * a.powi(i as i32);
        f2 += c * b.powi(i as i32);
    }
    (f1, f2)
}

/// Best fused error over all counting rules:
/// `theta_hat^K / (1 + theta_hat^K)`, evaluated as a logistic in `K ln theta_hat`.
pub fn wf_optimal_error(sensors: u64, theta: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_theta(theta)?;
    Ok(wf_optimal_error_unchecked(sensors, theta))
}

fn wf_optimal_error_unchecked(sensors: u64, theta: f64) -> f64 {
    let t = sensors as f64 * (theta.ln() - (-theta).ln_1p());
    if t > 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Excess fused error of threshold `1 <= k <= ⌊K/2⌋` over `k = 0`, both at
/// their `l1` intersections.
pub fn error_gap(sensors: u64, k: u64, theta: f64) -> Result<f64> {
    if k == 0 {
        return Err(DdnError::Threshold {
            sensors,
            k: 0,
            reason: "the gap is measured against k = 0, so k must be at least 1",
        });
    }
    let hit = intersect_l1(sensors, k, theta)?;
    let direct = pm_fusion(hit.point.p_m, sensors, k)?;
    Ok(direct - wf_optimal_error_unchecked(sensors, theta))
}

/// [`error_gap`] through the partial sums instead of the fused miss:
/// `E0 ((th^K f1 + f1) / (th^K f1 + f2) - 1)` with `E0 = th^K / (1 + th^K)`.
pub fn error_gap_from_sums(sensors: u64, k: u64, theta: f64) -> Result<f64> {
    let hit = intersect_l1(sensors, k, theta)?;
    let th = theta_hat(theta);
    let (f1, f2) = set_condition_sums(sensors, k, hit.x_m, th);
    let thk = th.powi(sensors as i32);
    let e0 = thk / (1.0 + thk);
    Ok(e0 * ((thk * f1 + f1) / (thk * f1 + f2) - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScanEntry {
    pub k: u64,
    pub intersection: Intersection,
    pub error: f64,
}

/// For every threshold `k ∈ [0, K - 1]`, intersect the robust fusion curve with
/// the butterfly edge it can reach and record the fused error there.
pub fn scan_thresholds(sensors: u64, theta: f64) -> Result<Vec<ThresholdScanEntry>> {
    check_sensors(sensors)?;
    check_theta(theta)?;
    (0..sensors)
        .map(|k| {
            let hit = if 2 * k < sensors {
                intersect_l1(sensors, k, theta)?
            } else {
                intersect_l2(sensors, k, theta)?
            };
            Ok(ThresholdScanEntry {
                k,
                intersection: hit,
                error: hit.error(sensors, k)?,
            })
        })
        .collect()
}

/// Lowest-error entry of a scan; near-ties resolve to the smallest `k`.
pub fn scan_argmin(scan: &[ThresholdScanEntry]) -> Option<&ThresholdScanEntry> {
    let min = scan.iter().map(|e| e.error).fold(f64::INFINITY, f64::min);
    scan.iter().find(|e| e.error <= min + min.abs() * 1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WfLossReport {
    pub theta: f64,
    pub sensors: u64,
    /// Consensus network error, `P(Bin(K, theta) >= ⌈K/2⌉)`.
    pub wof_error: f64,
    /// Best fusion-center error, `theta_hat^K / (1 + theta_hat^K)`.
    pub wf_error: f64,
    pub loss: f64,
    pub best_k: u64,
    /// Sensor operating point of the best design, on `l1`.
    pub best_point: OperatingPoint,
    /// Outcome of the exhaustive threshold scan (`K <= MAX_SCAN_SENSORS` only).
    pub verified: Option<bool>,
}

/// Maximum loss of a robust consensus network against the best robust
/// fusion-center network with the same `K` sensors.
pub fn max_wf_loss(sensors: u64, theta: f64) -> Result<WfLossReport> {
    check_odd(sensors)?;
    check_theta(theta)?;
    let wof_error = consensus_pf(sensors, theta)?;
    let wf_error = wf_optimal_error_unchecked(sensors, theta);
    let th = theta_hat(theta);
    // k = 0 on l1: x^K = 1 / (1 + th^K)
    let shrink = (th.ln() * sensors as f64).exp().ln_1p() / sensors as f64;
    let p_f = -(-shrink).exp_m1();
    let best_point = OperatingPoint {
        p_f,
        p_m: th * (-shrink).exp(),
    };
    let verified = if sensors <= MAX_SCAN_SENSORS {
        let scan = scan_thresholds(sensors, theta)?;
        let best = scan_argmin(&scan).expect("scan is non-empty");
        Some((best.error - wf_error).abs() <= SCAN_TOL && (best.k == 0 || best.k == sensors - 1))
    } else {
        None
    };
    Ok(WfLossReport {
        theta,
        sensors,
        wof_error,
        wf_error,
        loss: wof_error - wf_error,
        best_k: 0,
        best_point,
        verified,
    })
}

fn wf_loss_unchecked(sensors: u64, theta: f64) -> f64 {
    if theta <= 0.0 || theta >= 0.5 {
        return 0.0;
    }
    consensus_pf(sensors, theta).unwrap() - wf_optimal_error_unchecked(sensors, theta)
}

/// Supremum over `theta ∈ (0, 1/2)` of the fusion-center gain for odd `K`.
///
/// The 64-point grid is evaluated in parallel and reduced in index order, so
/// the argmax (lowest `theta` on ties) does not depend on scheduling.
pub fn sup_wf_loss(sensors: u64) -> Result<(f64, f64)> {
    check_odd(sensors)?;
    let n = GRID_POINTS;
    let at = |i: usize| 0.5 * i as f64 / (n - 1) as f64;
    let values: Vec<f64> = (0..n).into_par_iter().map(|i| wf_loss_unchecked(sensors, at(i))).collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let lo = at(best.saturating_sub(1));
    let hi = at((best + 1).min(n - 1));
    let (theta, loss) = golden_section_max(|t| wf_loss_unchecked(sensors, t), lo, hi, GOLDEN_TOL);
    if loss >= values[best] {
        Ok((theta, loss))
    } else {
        Ok((at(best), values[best]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductCheck {
    /// `|Π p_m,i + Π (1 - p_f,i) - 1| <= 1e-10`: the OR rule is robust.
    pub condition_holds: bool,
    /// Fused error `Π p_m,i`.
    pub product_error: f64,
    /// The identical-sensor optimum `theta_hat^K / (1 + theta_hat^K)`.
    pub identical_optimum: f64,
}

/// Robustness of the OR rule (`k = 0`) for non-identical sensors on `l1`.
pub fn nonidentical_product_check(points: &[OperatingPoint], theta: f64) -> Result<ProductCheck> {
    if points.is_empty() {
        return Err(DdnError::Domain {
            name: "number of operating points",
            value: 0.0,
            domain: "[1, inf)",
        });
    }
    check_theta(theta)?;
    let th = theta_hat(theta);
    let mut prod_pm = 1.0;
    let mut prod_x = 1.0;
    for (i, pt) in points.iter().enumerate() {
        check_prob("p_f", pt.p_f)?;
        check_prob("p_m", pt.p_m)?;
        if (pt.p_m - th * (1.0 - pt.p_f)).abs() > 1e-9 {
            return Err(DdnError::Contract(format!(
                "operating point {i} ({}, {}) is not on l1",
                pt.p_f, pt.p_m
            )));
        }
        prod_pm *= pt.p_m;
        prod_x *= 1.0 - pt.p_f;
    }
    Ok(ProductCheck {
        condition_holds: (prod_pm + prod_x - 1.0).abs() <= 1e-10,
        product_error: prod_pm,
        identical_optimum: wf_optimal_error_unchecked(points.len() as u64, theta),
    })
}

/// Number of fusion-center sensors (OR rule) matching the error of a
/// `K2`-sensor consensus network: `⌈ln P̂ / ln theta_hat⌉` with
/// `P̂ = P / (1 - P)` and `P` the consensus error.
///
/// The ratio is formed in log space; a ratio within `1e-9` of an integer is
/// taken as that integer.
pub fn equivalent_sensor_count(k2: u64, theta: f64) -> Result<u64> {
    check_odd(k2)?;
    check_theta(theta)?;
    let ln_p = ln_consensus_error(k2, theta)?;
    let ln_odds = ln_p - (-ln_p.exp()).ln_1p();
    if !(ln_odds < 0.0) {
        return Err(DdnError::Domain {
            name: "consensus error odds",
            value: ln_odds.exp(),
            domain: "(0, 1)",
        });
    }
    let ln_th = theta.ln() - (-theta).ln_1p();
    let ratio = ln_odds / ln_th;
    Ok(((ratio - 1e-9).ceil() as u64).max(1))
}

/// Range of `theta` on a grid of spacing `step` over `(0, 1/2)` where
/// [`equivalent_sensor_count`] returns `target`; `None` if never.
pub fn equivalent_count_interval(k2: u64, target: u64, step: f64) -> Result<Option<(f64, f64)>> {
    check_odd(k2)?;
    let n = (0.5 / step).ceil() as usize;
    let mut hit: Option<(f64, f64)> = None;
    for i in 1..n {
        let theta = i as f64 * step;
        if theta >= 0.5 {
            break;
        }
        if equivalent_sensor_count(k2, theta)? == target {
            hit = Some(match hit {
                None => (theta, theta),
                Some((lo, _)) => (lo, theta),
            });
        }
    }
    Ok(hit)
}
