//! Named numerical claims, grouped into suites, each checked on a fixed grid
//! with a fixed tolerance.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::binom::{consensus_pf, majority_cdf, OperatingPoint};
use crate::fusion::{
    equivalent_count_interval, equivalent_sensor_count, error_gap, h_map, max_wf_loss, nonidentical_product_check,
    pf_fusion, pm_fusion, scan_argmin, scan_thresholds, sup_wf_loss, wf_optimal_error, FusionMapQuery,
};
use crate::model::GaussianShiftModel;
use crate::oracle::{mc_zero_loss_probability, MC_SAMPLES, MC_SEED};
use crate::pbpo::{check_prop1, pbpo_thresholds, CostTensor2, CouplingDensity, RiskParams};
use crate::sim::{direct_majority, gossip, Protocol, Topology};
use crate::single::{max_single_loss, multi_loss_inf_crossover, theta_hat};

/// Points with `1 - h < SATURATION_BAND` carry too few significant digits in
/// `1 - h` for strict comparisons or round trips; they are only checked
/// non-strictly.
pub const SATURATION_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Props,
    Theorem1,
    Prop2,
    Pbpo,
    All,
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "props" => Ok(Suite::Props),
            "theorem1" => Ok(Suite::Theorem1),
            "prop2" => Ok(Suite::Prop2),
            "pbpo" => Ok(Suite::Pbpo),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected props, theorem1, prop2, pbpo or all)"
            )),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Props => "props",
            Suite::Theorem1 => "theorem1",
            Suite::Prop2 => "prop2",
            Suite::Pbpo => "pbpo",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub name: &'static str,
    pub grid: String,
    pub tolerance: f64,
    pub passed: bool,
    /// Worst deviation or the first counterexample.
    pub detail: String,
}

impl Claim {
    fn new(name: &'static str, grid: impl Into<String>, tolerance: f64, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            grid: grid.into(),
            tolerance,
            passed,
            detail: detail.into(),
        }
    }
}

pub fn run_suite(suite: Suite) -> Vec<Claim> {
    match suite {
        Suite::Props => props(),
        Suite::Theorem1 => theorem1(),
        Suite::Prop2 => prop2(),
        Suite::Pbpo => pbpo(),
        Suite::All => {
            let mut v = prop2();
            v.extend(props());
            v.extend(theorem1());
            v.extend(pbpo());
            v
        }
    }
}

fn prob_grid() -> impl Iterator<Item = f64> + Clone {
    (1..100).map(|i| i as f64 / 100.0)
}

fn theta_grid() -> impl Iterator<Item = f64> + Clone {
    (1..10).map(|i| i as f64 * 0.05)
}

pub fn prop2() -> Vec<Claim> {
    vec![consensus_even_odd_equality(), complementarity()]
}

pub fn consensus_even_odd_equality() -> Claim {
    let tol = 1e-12;
    let mut worst = (0.0, 0, 0.0);
    for k in 1..=50u64 {
        for p in prob_grid() {
            let d = (consensus_pf(2 * k - 1, p).unwrap() - consensus_pf(2 * k, p).unwrap()).abs();
            if d > worst.0 {
                worst = (d, k, p);
            }
        }
    }
    Claim::new(
        "consensus_even_odd_equality",
        "K in [1, 50], p in {0.01, ..., 0.99}",
        tol,
        worst.0 <= tol,
        format!("max deviation {:.3e} at K = {}, p = {}", worst.0, worst.1, worst.2),
    )
}

pub fn complementarity() -> Claim {
    let tol = 1e-12;
    let mut worst = (0.0, 0, 0.0);
    for n in 1..=100u64 {
        for p in prob_grid() {
            let d = (majority_cdf(n, p).unwrap() + majority_cdf(n, 1.0 - p).unwrap() - 1.0).abs();
            if d > worst.0 {
                worst = (d, n, p);
            }
        }
    }
    Claim::new(
        "complementarity",
        "K in [1, 100], p in {0.01, ..., 0.99}",
        tol,
        worst.0 <= tol,
        format!("max deviation {:.3e} at K = {}, p = {}", worst.0, worst.1, worst.2),
    )
}

pub fn props() -> Vec<Claim> {
    vec![
        max_single_loss_claim(),
        zero_loss_probability(),
        multi_loss_crossover(),
        fusion_monotonicity(),
        fusion_map_monotonicity(),
        fusion_map_dichotomy(),
        fusion_map_ordering(),
        fusion_map_symmetry(),
        gossip_equals_majority(),
    ]
}

pub fn max_single_loss_claim() -> Claim {
    let (theta, loss) = max_single_loss();
    let want_loss = (3.0 - 2.0 * 2f64.sqrt()) / 2.0;
    let want_theta = 1.0 - 2f64.sqrt() / 2.0;
    let dl = (loss - want_loss).abs();
    let dt = (theta - want_theta).abs();
    Claim::new(
        "max_single_loss",
        "theta in [0, 1/2]",
        1e-9,
        dl <= 1e-9 && dt <= 1e-6,
        format!("loss {loss:.12} (dev {dl:.3e}), theta {theta:.12} (dev {dt:.3e}, tolerance 1e-6)"),
    )
}

pub fn zero_loss_probability() -> Claim {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, theta) in [0.1, 0.2, 0.3].into_iter().enumerate() {
        let est = mc_zero_loss_probability(theta, MC_SAMPLES, MC_SEED + i as u64).unwrap();
        let z = est.z(1.0 - theta);
        worst = worst.max(z);
        parts.push(format!("theta {theta}: {:.6} (z {:.2})", est.estimate, z));
    }
    Claim::new(
        "zero_loss_probability",
        "theta in {0.1, 0.2, 0.3}, 1e6 uniform samples",
        3.0,
        worst <= 3.0,
        parts.join("; "),
    )
}

pub fn multi_loss_crossover() -> Claim {
    let root = multi_loss_inf_crossover(51).unwrap();
    let ok = matches!(root, Some(t) if (0.025..=0.029).contains(&t));
    Claim::new(
        "multi_loss_crossover",
        "K = 51, endpoint position, theta on a 1e-3 grid then bisection",
        0.002,
        ok,
        format!("sign change at theta = {root:?}, expected in [0.025, 0.029]"),
    )
}

const MAP_MAX_SENSORS: u64 = 25;

fn h(n: u64, k: u64, p: f64) -> f64 {
    h_map(FusionMapQuery::new(n, k, p).unwrap()).unwrap()
}

fn full_grid() -> impl Iterator<Item = f64> + Clone {
    (0..=100).map(|i| i as f64 / 100.0)
}

fn map_grid_label(endpoints: bool) -> String {
    let p = if endpoints { "0, 0.01, ..., 1" } else { "0.01, ..., 0.99" };
    format!("K in [1, {MAP_MAX_SENSORS}], k in [0, K - 1], p in {{{p}}}")
}

pub fn fusion_monotonicity() -> Claim {
    let slack = 1e-15;
    let mut bad = None;
    'outer: for n in 1..=MAP_MAX_SENSORS {
        for k in 0..=n {
            let pts: Vec<f64> = full_grid().collect();
            for w in pts.windows(2) {
                let (a, b) = (w[0], w[1]);
                if pf_fusion(b, n, k).unwrap() < pf_fusion(a, n, k).unwrap() - slack
                    || pm_fusion(b, n, k).unwrap() < pm_fusion(a, n, k).unwrap() - slack
                {
                    bad = Some(format!("not monotone in p at K = {n}, k = {k}, p = {a}"));
                    break 'outer;
                }
                if k < n
                    && (pf_fusion(a, n, k + 1).unwrap() > pf_fusion(a, n, k).unwrap() + slack
                        || pm_fusion(a, n, k + 1).unwrap() < pm_fusion(a, n, k).unwrap() - slack)
                {
                    bad = Some(format!("not monotone in k at K = {n}, k = {k}, p = {a}"));
                    break 'outer;
                }
            }
        }
    }
    Claim::new(
        "fusion_monotonicity",
        format!("K in [1, {MAP_MAX_SENSORS}], k in [0, K], p in {{0, 0.01, ..., 1}}"),
        slack,
        bad.is_none(),
        bad.unwrap_or_else(|| "pf_fusion, pm_fusion nondecreasing in p; pf_fusion nonincreasing, pm_fusion nondecreasing in k".into()),
    )
}

fn saturated(v: f64) -> bool {
    1.0 - v < SATURATION_BAND || v == 0.0
}

pub fn fusion_map_monotonicity() -> Claim {
    let mut bad = None;
    let mut exempt = 0;
    'outer: for n in 1..=MAP_MAX_SENSORS {
        for k in 0..n {
            let vals: Vec<f64> = full_grid().map(|p| h(n, k, p)).collect();
            for (i, w) in vals.windows(2).enumerate() {
                let strict_ok = w[1] > w[0];
                if w[1] < w[0] || (!strict_ok && !(saturated(w[0]) || saturated(w[1]))) {
                    bad = Some(format!("K = {n}, k = {k}, p = {}", i as f64 / 100.0));
                    break 'outer;
                }
                exempt += (!strict_ok) as usize;
            }
        }
    }
    Claim::new(
        "fusion_map_monotonicity",
        map_grid_label(true),
        0.0,
        bad.is_none(),
        bad.unwrap_or_else(|| format!("strictly increasing; {exempt} saturated steps only nondecreasing")),
    )
}

pub fn fusion_map_dichotomy() -> Claim {
    let tol = 1e-9;
    let mut bad = None;
    'outer: for n in 1..=MAP_MAX_SENSORS {
        for k in 0..n {
            for p in prob_grid() {
                let v = h(n, k, p);
                let ok = match (2 * k + 1).cmp(&n) {
                    std::cmp::Ordering::Less => v > p,
                    std::cmp::Ordering::Greater => v < p,
                    std::cmp::Ordering::Equal => (v - p).abs() <= tol,
                };
                if !ok {
                    bad = Some(format!("K = {n}, k = {k}, p = {p}: h = {v}"));
                    break 'outer;
                }
            }
        }
    }
    Claim::new(
        "fusion_map_dichotomy",
        map_grid_label(false),
        tol,
        bad.is_none(),
        bad.unwrap_or_else(|| "above the diagonal for 2k + 1 < K, below for 2k + 1 > K, on it otherwise".into()),
    )
}

pub fn fusion_map_ordering() -> Claim {
    let mut bad = None;
    'outer: for n in 2..=MAP_MAX_SENSORS {
        for k in 0..n - 1 {
            for p in prob_grid() {
                let (a, b) = (h(n, k, p), h(n, k + 1, p));
                if b > a || (b == a && !saturated(a)) {
                    bad = Some(format!("K = {n}, k = {k}, p = {p}: {a} vs {b}"));
                    break 'outer;
                }
            }
        }
    }
    Claim::new(
        "fusion_map_ordering",
        map_grid_label(false),
        0.0,
        bad.is_none(),
        bad.unwrap_or_else(|| "h decreasing in k at every p".into()),
    )
}

pub fn fusion_map_symmetry() -> Claim {
    let tol = 1e-9;
    let mut worst = (0.0, String::new());
    let mut exempt = 0;
    for n in 1..=MAP_MAX_SENSORS {
        for k in 0..n {
            for p in prob_grid() {
                let v = h(n, k, p);
                if saturated(v) {
                    exempt += 1;
                    continue;
                }
                let back = h(n, n - 1 - k, v);
                let d = (back - p).abs();
                if d > worst.0 {
                    worst = (d, format!("K = {n}, k = {k}, p = {p}"));
                }
            }
        }
    }
    Claim::new(
        "fusion_map_symmetry",
        map_grid_label(false),
        tol,
        worst.0 <= tol,
        format!(
            "h_(K-1-k)(h_k(p)) = p, max deviation {:.3e} {}; {exempt} saturated points skipped",
            worst.0, worst.1
        ),
    )
}

pub fn gossip_equals_majority() -> Claim {
    let mut bad = None;
    let mut fallbacks = 0;
    'outer: for n in [3usize, 5, 7, 9] {
        let t = Topology::ring(n).unwrap();
        for m in 0u32..1 << n {
            let bits: Vec<bool> = (0..n).map(|i| m >> i & 1 == 1).collect();
            for kappa in [false, true] {
                for p in [Protocol::LocalMajority, Protocol::VoteFlooding] {
                    let out = gossip(&t, &bits, kappa, n as u32, p);
                    fallbacks += out.fallback as usize;
                    if out.decision != direct_majority(&bits, kappa) {
                        bad = Some(format!("K = {n}, pattern {m:b}, {p:?}"));
                        break 'outer;
                    }
                }
            }
        }
    }
    Claim::new(
        "gossip_equals_majority",
        "rings K in {3, 5, 7, 9}, all 2^K patterns, both protocols",
        0.0,
        bad.is_none(),
        bad.unwrap_or_else(|| format!("all outcomes equal the direct majority; {fallbacks} runs used the budget fallback")),
    )
}

pub fn theorem1() -> Vec<Claim> {
    vec![
        counting_rule_optimality(),
        error_gap_positive(),
        sup_loss_trend(),
        nonidentical_product(),
        equivalent_count(),
        wf_loss_examples(),
    ]
}

pub fn counting_rule_optimality() -> Claim {
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    let mut bad = None;
    for n in (1..=11u64).step_by(2) {
        for theta in theta_grid() {
            let scan = scan_thresholds(n, theta).unwrap();
            let best = scan_argmin(&scan).unwrap();
            let want = wf_optimal_error(n, theta).unwrap();
            let d = (best.error - want).abs();
            worst = worst.max(d);
            if !(best.k == 0 || best.k == n - 1) && bad.is_none() {
                bad = Some(format!("argmin k = {} at K = {n}, theta = {theta}", best.k));
            }
        }
    }
    Claim::new(
        "counting_rule_optimality",
        "odd K in [1, 11], theta in {0.05, ..., 0.45}, every k in [0, K - 1]",
        tol,
        worst <= tol && bad.is_none(),
        bad.unwrap_or_else(|| format!("min over k matches theta_hat^K / (1 + theta_hat^K), max deviation {worst:.3e}; argmin k = 0 (k = K - 1 ties)")),
    )
}

pub fn error_gap_positive() -> Claim {
    let mut bad = None;
    let mut least = f64::INFINITY;
    'outer: for n in (3..=11u64).step_by(2) {
        for k in 1..=n / 2 {
            for theta in theta_grid() {
                let d = error_gap(n, k, theta).unwrap();
                least = least.min(d);
                if !(d > 0.0) {
                    bad = Some(format!("K = {n}, k = {k}, theta = {theta}: gap {d}"));
                    break 'outer;
                }
            }
        }
    }
    Claim::new(
        "error_gap_positive",
        "odd K in [3, 11], k in [1, K/2], theta in {0.05, ..., 0.45}",
        0.0,
        bad.is_none(),
        bad.unwrap_or_else(|| format!("smallest gap {least:.3e}")),
    )
}

pub fn sup_loss_trend() -> Claim {
    let ks = [11u64, 101, 1001, 10001];
    let vals: Vec<(f64, f64)> = ks.iter().map(|&n| sup_wf_loss(n).unwrap()).collect();
    let increasing = vals.windows(2).all(|w| w[1].1 > w[0].1);
    let below_half = vals.iter().all(|v| v.1 < 0.5);
    let last = vals.last().unwrap().1;
    let detail = ks
        .iter()
        .zip(&vals)
        .map(|(n, (t, l))| format!("K = {n}: {l:.6} at theta {t:.4}"))
        .collect::<Vec<_>>()
        .join("; ");
    Claim::new(
        "sup_loss_trend",
        "odd K in {11, 101, 1001, 10001}",
        0.0,
        increasing && below_half && last > 0.45,
        detail,
    )
}

pub fn nonidentical_product() -> Claim {
    let tol = 1e-12;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for theta in [0.1, 0.25, 0.4] {
        let th = theta_hat(theta);
        let on_l1 = |x: f64| OperatingPoint {
            p_f: 1.0 - x,
            p_m: th * x,
        };
        // two and three sensors with x products pinned to 1 / (1 + th^K)
        let c2 = 1.0 / (1.0 + th * th);
        let pair = [on_l1(c2.powf(0.3)), on_l1(c2.powf(0.7))];
        let c3 = 1.0 / (1.0 + th.powi(3));
        let triple = [on_l1(c3.powf(0.2)), on_l1(c3.powf(0.3)), on_l1(c3.powf(0.5))];
        for set in [&pair[..], &triple[..]] {
            let c = nonidentical_product_check(set, theta).unwrap();
            ok &= c.condition_holds;
            worst = worst.max((c.product_error - c.identical_optimum).abs());
        }
        // off the condition the product error is not the optimum
        let off = [on_l1(0.95), on_l1(0.95)];
        ok &= !nonidentical_product_check(&off, theta).unwrap().condition_holds;
    }
    Claim::new(
        "nonidentical_product",
        "theta in {0.1, 0.25, 0.4}, two and three distinct l1 points",
        tol,
        ok && worst <= tol,
        format!("condition holds exactly on the constructed sets; max |product - optimum| {worst:.3e}"),
    )
}

pub fn equivalent_count() -> Claim {
    let small = equivalent_sensor_count(3, 0.2).unwrap();
    let interval = equivalent_count_interval(101, 19, 1e-3).unwrap();
    let ok = small == 2 && interval.is_some();
    Claim::new(
        "equivalent_sensor_count",
        "K2 = 3 at theta = 0.2; K2 = 101 over theta on a 1e-3 grid",
        0.0,
        ok,
        format!("K2 = 3 -> K1 = {small}; K2 = 101 -> K1 = 19 for theta in {interval:?}"),
    )
}

pub fn pbpo() -> Vec<Claim> {
    vec![pbpo_decoupling(), robust_iff_diagonal()]
}

/// Additive costs `u(i1, j) + u(i2, j)` with false-alarm cost `a` and miss
/// cost `b`; these have no coupling terms.
fn additive_costs(a: f64, b: f64) -> CostTensor2 {
    let u = |i: usize, j: usize| match (i, j) {
        (1, 0) => a,
        (0, 1) => b,
        _ => 0.0,
    };
    let mut c = [[[0.0; 2]; 2]; 2];
    for (i1, plane) in c.iter_mut().enumerate() {
        for (i2, row) in plane.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = u(i1, j) + u(i2, j);
            }
        }
    }
    CostTensor2::new(c)
}

pub fn pbpo_decoupling() -> Claim {
    let mut bad = None;
    let mut cases = 0;
    'outer: for (a, b) in [(1.0, 1.0), (2.0, 1.0), (0.5, 3.0)] {
        let costs = additive_costs(a, b);
        for pi0 in [0.3, 0.5, 0.7] {
            let priors = RiskParams::new(pi0).unwrap();
            let mut reference = None;
            for theta in [0.1, 0.2, 0.3, 0.4] {
                let model = GaussianShiftModel::from_theta(theta).unwrap();
                for density in [CouplingDensity::AsPrinted, CouplingDensity::Alternative] {
                    cases += 1;
                    let s = pbpo_thresholds(&costs, priors, &model, density).unwrap();
                    let r = *reference.get_or_insert(s.t1);
                    if !s.converged || s.iterations > 2 || s.t1 != s.t2 || (s.t1 - r).abs() > 1e-12 {
                        bad = Some(format!("costs ({a}, {b}), pi0 {pi0}, theta {theta}: {s:?}"));
                        break 'outer;
                    }
                }
            }
        }
    }
    Claim::new(
        "pbpo_decoupling",
        "additive costs (a, b) in {(1,1), (2,1), (0.5,3)}, pi0 in {0.3, 0.5, 0.7}, theta in {0.1, ..., 0.4}",
        1e-12,
        bad.is_none(),
        bad.unwrap_or_else(|| format!("{cases} cases: at most 2 iterations, equal thresholds, independent of theta")),
    )
}

pub fn robust_iff_diagonal() -> Claim {
    let mut bad = None;
    'outer: for n in [1u64, 3, 5, 9, 15] {
        for i in 0..=20 {
            for j in 0..=20 {
                let (pf, pm) = (i as f64 / 20.0, j as f64 / 20.0);
                let r = check_prop1(n, OperatingPoint { p_f: pf, p_m: pm }).unwrap();
                if r.robust != (i == j) {
                    bad = Some(format!("K = {n}, ({pf}, {pm}): robust = {}", r.robust));
                    break 'outer;
                }
            }
        }
    }
    Claim::new(
        "robust_iff_diagonal",
        "odd K in {1, 3, 5, 9, 15}, (p_f, p_m) on a 0.05 grid",
        1e-12,
        bad.is_none(),
        bad.unwrap_or_else(|| "system P_F = P_M exactly on the local diagonal".into()),
    )
}

pub fn wf_loss_examples() -> Claim {
    let r3 = max_wf_loss(3, 0.2).unwrap();
    let r1 = max_wf_loss(1, 0.2).unwrap();
    let want = 0.104 - 0.015_625 / 1.015_625;
    let ok = (r3.loss - want).abs() <= 1e-12 && r1.loss.abs() <= 1e-12 && r3.verified == Some(true);
    Claim::new(
        "wf_loss_examples",
        "K in {1, 3}, theta = 0.2",
        1e-12,
        ok,
        format!("K = 3: {:.10}; K = 1: {:.3e}", r3.loss, r1.loss),
    )
}
