//! Binomial tail kernels and the consensus (majority-vote) fusion polynomial.
//!
//! Every tail is evaluated on the side of the distribution where it is small:
//! the leading probability mass is built from a log-binomial coefficient and
//! the remaining terms are accumulated as ratios relative to it, so tails far
//! below `f64::MIN_POSITIVE` are still available through the `ln_*` variants.
//! The complementary side is then `1 - small`, which keeps
//! `binom_cdf(k) + binom_tail_ge(k + 1) == 1` to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{check_odd, check_prob, check_sensors, DdnError, Result};

/// A point on the ROC plane: false-alarm and miss probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub p_f: f64,
    pub p_m: f64,
}

impl OperatingPoint {
    pub fn new(p_f: f64, p_m: f64) -> Result<Self> {
        check_prob("p_f", p_f)?;
        check_prob("p_m", p_m)?;
        Ok(Self { p_f, p_m })
    }

    /// Equal-prior average error `(p_f + p_m) / 2`.
    pub fn average_error(&self) -> f64 {
        0.5 * (self.p_f + self.p_m)
    }

    pub fn swapped(&self) -> Self {
        Self {
            p_f: self.p_m,
            p_m: self.p_f,
        }
    }
}

/// Counting fusion rule over `sensors` binary decisions.
///
/// The fused decision is 1 when more than `threshold` sensors alarm, 0 when
/// fewer do, and a Bernoulli(`tie_prob`) coin when exactly `threshold` alarm.
/// With `tie_prob = 0` this is the plain "more than k" counting rule; the
/// majority vote with randomized ties is `threshold = K/2, tie_prob = 1/2`
/// for even K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionRule {
    sensors: u64,
    threshold: u64,
    tie_prob: f64,
}

impl FusionRule {
    pub fn new(sensors: u64, threshold: u64, tie_prob: f64) -> Result<Self> {
        check_sensors(sensors)?;
        if threshold > sensors {
            return Err(DdnError::Threshold {
                sensors,
                k: threshold as i64,
                reason: "must lie in [0, K]",
            });
        }
        check_prob("tie_prob", tie_prob)?;
        Ok(Self {
            sensors,
            threshold,
            tie_prob,
        })
    }

    /// Decide 1 iff more than `k` sensors alarm.
    pub fn counting(sensors: u64, k: u64) -> Result<Self> {
        Self::new(sensors, k, 0.0)
    }

    /// Majority vote; ties (even K only) are broken by a fair coin.
    pub fn majority(sensors: u64) -> Result<Self> {
        check_sensors(sensors)?;
        if sensors % 2 == 1 {
            Self::new(sensors, sensors / 2, 0.0)
        } else {
            Self::new(sensors, sensors / 2, 0.5)
        }
    }

    pub fn sensors(&self) -> u64 {
        self.sensors
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    pub fn tie_prob(&self) -> f64 {
        self.tie_prob
    }

    /// True when the tie probability is anything other than 0 or 1/2.
    pub fn has_nonstandard_tie(&self) -> bool {
        self.tie_prob != 0.0 && self.tie_prob != 0.5
    }

    /// Fused decision for `alarms` local alarms; `coin` is drawn only on a tie.
    pub fn decide(&self, alarms: u64, coin: impl FnOnce(f64) -> bool) -> bool {
        use std::cmp::Ordering::*;
        match alarms.cmp(&self.threshold) {
            Greater => true,
            Less => false,
            Equal => self.tie_prob > 0.0 && coin(self.tie_prob),
        }
    }

    /// System false-alarm probability when every sensor has false-alarm `p_f`.
    pub fn system_pf(&self, p_f: f64) -> Result<f64> {
        let k = self.threshold;
        let above = binom_tail_ge(self.sensors, k as i64 + 1, p_f)?;
        let at = binom_pmf(self.sensors, k, p_f)?;
        Ok(above + self.tie_prob * at)
    }

    /// System miss probability when every sensor has miss probability `p_m`.
    pub fn system_pm(&self, p_m: f64) -> Result<f64> {
        // alarms < k  <=>  misses >= K - k + 1
        let n = self.sensors;
        let k = self.threshold;
        let below = binom_tail_ge(n, (n - k) as i64 + 1, p_m)?;
        let at = binom_pmf(n, n - k, p_m)?;
        Ok(below + (1.0 - self.tie_prob) * at)
    }
}

/// `ln C(n, k)`; exact integer arithmetic for moderate `n`, log-gamma beyond.
pub(crate) fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    if n <= 120 {
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        (c as f64).ln()
    } else {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
    }
}

/// `ln P(X = i)` for `X ~ Bin(n, p)` with `0 < p < 1`, `q = 1 - p` given separately.
fn ln_pmf_inner(n: u64, i: u64, p: f64, q: f64) -> f64 {
    let mut v = ln_choose(n, i);
    if i > 0 {
        v += i as f64 * p.ln();
    }
    if n > i {
        v += (n - i) as f64 * q.ln();
    }
    v
}

/// `ln P(X >= j)` summed directly. Requires `0 < p < 1`, `1 <= j <= n` and
/// `j >= n p`, so the terms are non-increasing from `j` onwards.
fn ln_upper_direct(n: u64, j: u64, p: f64, q: f64) -> f64 {
    let lead = ln_pmf_inner(n, j, p, q);
    let ratio = p / q;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for i in j..n {
        term *= (n - i) as f64 / (i + 1) as f64 * ratio;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    lead + sum.ln()
}

enum Tail {
    /// ln of the upper tail itself.
    Direct(f64),
    /// ln of the complementary lower tail.
    Complement(f64),
}

/// Upper tail `P(X >= j)` for `1 <= j <= n`, `0 < p < 1`, on its small side.
fn upper_tail(n: u64, j: u64, p: f64) -> Tail {
    let q = 1.0 - p;
    if j as f64 >= n as f64 * p {
        Tail::Direct(ln_upper_direct(n, j, p, q))
    } else {
        // P(X <= j - 1) = P(n - X >= n - j + 1) with n - X ~ Bin(n, q)
        Tail::Complement(ln_upper_direct(n, n - j + 1, q, p))
    }
}

/// `P(X >= j)` for `X ~ Bin(K, p)`.
pub fn binom_tail_ge(sensors: u64, j: i64, p: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_prob("p", p)?;
    if j <= 0 {
        return Ok(1.0);
    }
    if j as u64 > sensors {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok(match upper_tail(sensors, j as u64, p) {
        Tail::Direct(l) => l.exp(),
        Tail::Complement(l) => 1.0 - l.exp(),
    })
}

/// `ln P(X >= j)`; meaningful far below the smallest normal `f64`.
pub fn ln_binom_tail_ge(sensors: u64, j: i64, p: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_prob("p", p)?;
    if j <= 0 {
        return Ok(0.0);
    }
    if j as u64 > sensors || p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(match upper_tail(sensors, j as u64, p) {
        Tail::Direct(l) => l,
        Tail::Complement(l) => (-l.exp()).ln_1p(),
    })
}

/// `P(X <= k)` for `X ~ Bin(K, p)`.
pub fn binom_cdf(k: i64, sensors: u64, p: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_prob("p", p)?;
    if k < 0 {
        return Ok(0.0);
    }
    if k as u64 >= sensors {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(match upper_tail(sensors, k as u64 + 1, p) {
        Tail::Direct(l) => 1.0 - l.exp(),
        Tail::Complement(l) => l.exp(),
    })
}

/// `P(X = i)` for `X ~ Bin(K, p)`.
pub fn binom_pmf(sensors: u64, i: u64, p: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_prob("p", p)?;
    if i > sensors {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(if i == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if i == sensors { 1.0 } else { 0.0 });
    }
    Ok(ln_pmf_inner(sensors, i, p, 1.0 - p).exp())
}

/// System false-alarm probability of the majority vote with fair-coin ties,
/// all `K` sensors having false-alarm probability `p_f`.
pub fn consensus_pf(sensors: u64, p_f: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_prob("p_f", p_f)?;
    if sensors % 2 == 1 {
        binom_tail_ge(sensors, (sensors as i64 + 1) / 2, p_f)
    } else {
        let half = sensors / 2;
        let strict = binom_tail_ge(sensors, half as i64 + 1, p_f)?;
        let tie = binom_pmf(sensors, half, p_f)?;
        Ok(strict + 0.5 * tie)
    }
}

/// Tie-randomized majority cdf: `P(X < K/2) + P(X = K/2)/2`.
///
/// Computed from the lower tail directly, so together with
/// [`consensus_pf`] it gives two independent routes to the same polynomial.
pub fn majority_cdf(sensors: u64, p: f64) -> Result<f64> {
    check_sensors(sensors)?;
    check_prob("p", p)?;
    if sensors % 2 == 1 {
        binom_cdf((sensors as i64 - 1) / 2, sensors, p)
    } else {
        let half = sensors / 2;
        let strict = binom_cdf(half as i64 - 1, sensors, p)?;
        let tie = binom_pmf(sensors, half, p)?;
        Ok(strict + 0.5 * tie)
    }
}

/// Average (equivalently false-alarm or miss) error of the majority vote over
/// an odd number of robust sensors each operating at `P_F = P_M = theta`.
pub fn consensus_error(sensors: u64, theta: f64) -> Result<f64> {
    check_odd(sensors)?;
    check_half(theta)?;
    binom_tail_ge(sensors, (sensors as i64 + 1) / 2, theta)
}

/// Natural log of [`consensus_error`].
pub fn ln_consensus_error(sensors: u64, theta: f64) -> Result<f64> {
    check_odd(sensors)?;
    check_half(theta)?;
    ln_binom_tail_ge(sensors, (sensors as i64 + 1) / 2, theta)
}

fn check_half(theta: f64) -> Result<f64> {
    if (0.0..=0.5).contains(&theta) {
        Ok(theta)
    } else {
        Err(DdnError::Domain {
            name: "theta",
            value: theta,
            domain: "[0, 1/2]",
        })
    }
}
