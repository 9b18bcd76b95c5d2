//! Gaussian shift observation model: `H0: Y ~ N(0, 1)`, `H1: Y ~ N(mu, 1)`.
//!
//! The likelihood ratio `exp(mu y - mu^2 / 2)` is increasing in `y`, so every
//! likelihood-ratio test is an observation threshold. At `y = mu / 2` the
//! false-alarm and miss probabilities coincide, which is the minimax rule.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::binom::OperatingPoint;
use crate::error::{check_theta, DdnError, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal cdf.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal survival function `1 - cdf(x)`, without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper quantile: the `x` with `normal_sf(x) = q`, for `0 < q < 1`.
pub fn normal_isf(q: f64) -> f64 {
    let mut x = SQRT_2 * statrs::function::erf::erfc_inv(2.0 * q);
    // one Newton step against the libm survival function
    let pdf = normal_pdf(x);
    if pdf > 0.0 {
        x += (normal_sf(x) - q) / pdf;
    }
    x
}

/// Binary hypothesis source producing scalar observations.
pub trait ObservationModel {
    fn sample<R: Rng + ?Sized>(&self, alternative: bool, rng: &mut R) -> f64;

    /// Local decision of a sensor observing `y`.
    fn decide(&self, y: f64) -> bool;

    /// Operating point of the local decision rule.
    fn operating_point(&self) -> OperatingPoint;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianShiftModel {
    mu: f64,
    /// Observation-space threshold: decide 1 iff `y >= lrt_threshold`.
    lrt_threshold: f64,
}

impl GaussianShiftModel {
    /// Model with shift `mu > 0` and the minimax threshold `mu / 2`.
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(DdnError::Domain {
                name: "mu",
                value: mu,
                domain: "(0, inf)",
            });
        }
        Ok(Self {
            mu,
            lrt_threshold: mu / 2.0,
        })
    }

    /// Model whose minimax rule has `P_F = P_M = theta`: `mu = 2 Φ⁻¹(1 - theta)`.
    pub fn from_theta(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Self::new(2.0 * normal_isf(theta))
    }

    /// Same densities, different observation threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.lrt_threshold = threshold;
        self
    }

    /// Same densities, threshold on the likelihood ratio instead of `y`.
    pub fn with_ratio_threshold(self, ratio: f64) -> Result<Self> {
        let y = self.observation_threshold(ratio)?;
        Ok(self.with_threshold(y))
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lrt_threshold(&self) -> f64 {
        self.lrt_threshold
    }

    /// `theta = 1 - Φ(mu / 2)`, the common error of the minimax rule.
    pub fn theta(&self) -> f64 {
        normal_sf(self.mu / 2.0)
    }

    /// Observation threshold `y` equivalent to likelihood-ratio threshold `t`.
    pub fn observation_threshold(&self, ratio: f64) -> Result<f64> {
        if !(ratio > 0.0) {
            return Err(DdnError::Domain {
                name: "likelihood-ratio threshold",
                value: ratio,
                domain: "(0, inf)",
            });
        }
        Ok(ratio.ln() / self.mu + self.mu / 2.0)
    }

    /// False-alarm probability of the test `y >= y_t`.
    pub fn pf_at(&self, y_t: f64) -> f64 {
        normal_sf(y_t)
    }

    /// Miss probability of the test `y >= y_t`.
    pub fn pm_at(&self, y_t: f64) -> f64 {
        normal_cdf(y_t - self.mu)
    }

    /// Operating point of a likelihood-ratio threshold `t`.
    pub fn point_at_ratio(&self, ratio: f64) -> Result<OperatingPoint> {
        let y = self.observation_threshold(ratio)?;
        Ok(OperatingPoint {
            p_f: self.pf_at(y),
            p_m: self.pm_at(y),
        })
    }
}

impl ObservationModel for GaussianShiftModel {
    fn sample<R: Rng + ?Sized>(&self, alternative: bool, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        if alternative {
            z + self.mu
        } else {
            z
        }
    }

    fn decide(&self, y: f64) -> bool {
        y >= self.lrt_threshold
    }

    fn operating_point(&self) -> OperatingPoint {
        OperatingPoint {
            p_f: self.pf_at(self.lrt_threshold),
            p_m: self.pm_at(self.lrt_threshold),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_round_trip() {
        for i in 1..500 {
            let theta = i as f64 / 1000.0;
            let m = GaussianShiftModel::from_theta(theta).unwrap();
            assert!((m.theta() - theta).abs() <= 1e-12, "theta={theta}");
            let op = m.operating_point();
            assert!((op.p_f - theta).abs() <= 1e-12);
            assert!((op.p_m - theta).abs() <= 1e-12);
        }
    }

    #[test]
    fn mu_examples() {
        // 2 Φ⁻¹(0.8) = 2 * 0.8416212335729143
        let m = GaussianShiftModel::from_theta(0.2).unwrap();
        assert!((m.mu() - 1.683_242_467_145_828_6).abs() < 1e-12);
        // Φ(0.5) = 0.6914624612740131, so theta ≈ 0.309 gives mu ≈ 1
        let m = GaussianShiftModel::from_theta(1.0 - 0.691_462_461_274_013_1).unwrap();
        assert!((m.mu() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_rejected() {
        assert!(GaussianShiftModel::from_theta(0.5).is_err());
        assert!(GaussianShiftModel::from_theta(0.0).is_err());
        assert!(GaussianShiftModel::new(0.0).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_sf(5.0) - 2.866_515_718_791_939e-7).abs() < 1e-20);
        assert!((normal_isf(0.025) - 1.959_963_984_540_054).abs() < 1e-13);
    }

    #[test]
    fn ratio_threshold_one_is_minimax() {
        let m = GaussianShiftModel::from_theta(0.3).unwrap();
        let op = m.point_at_ratio(1.0).unwrap();
        assert!((op.p_f - op.p_m).abs() < 1e-14);
        assert!((op.p_f - 0.3).abs() < 1e-12);
    }
}
