//! Monte Carlo cross-checks of the butterfly geometry.
//!
//! Points are drawn uniformly on the unit square from a seeded ChaCha8 stream
//! and classified with [`ButterflyRegion`]; nothing here uses the closed-form
//! areas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binom::OperatingPoint;
use crate::error::{DdnError, Result};
use crate::single::ButterflyRegion;

pub const MC_SAMPLES: u64 = 1_000_000;
pub const MC_SEED: u64 = 0x5eed_0b5e_7a11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Samples the proportion is taken over.
    pub samples: u64,
}

impl McEstimate {
    fn proportion(hits: u64, samples: u64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            estimate: p,
            stderr: (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
        }
    }

    /// `|estimate - value|` in standard errors.
    pub fn z(&self, value: f64) -> f64 {
        (self.estimate - value).abs() / self.stderr
    }
}

fn uniform_points(samples: u64, seed: u64) -> impl Iterator<Item = OperatingPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(move |_| OperatingPoint {
        p_f: rng.random(),
        p_m: rng.random(),
    })
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(DdnError::Contract("samples must be at least 1".into()));
    }
    Ok(())
}

/// Fraction of the unit square inside the butterfly.
pub fn mc_butterfly_area(theta: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    let region = ButterflyRegion::new(theta)?;
    let hits = uniform_points(samples, seed).filter(|&p| region.contains(p)).count() as u64;
    Ok(McEstimate::proportion(hits, samples))
}

/// Rejection sampling of a uniform point on the butterfly; the estimate is
/// the fraction where the robust rule is already optimal.
pub fn mc_zero_loss_probability(theta: f64, samples: u64, seed: u64) -> Result<McEstimate> {
    check_samples(samples)?;
    let region = ButterflyRegion::new(theta)?;
    let (mut inside, mut gain) = (0u64, 0u64);
    for p in uniform_points(samples, seed) {
        if region.contains(p) {
            inside += 1;
            gain += region.in_gain_region(p) as u64;
        }
    }
    if inside == 0 {
        return Err(DdnError::Contract("no sample fell inside the region".into()));
    }
    Ok(McEstimate::proportion(inside - gain, inside))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::single::{butterfly_area, prob_zero_loss};

    #[test]
    fn area_matches_closed_form() {
        for theta in [0.1, 0.25, 0.4] {
            let est = mc_butterfly_area(theta, 200_000, 3).unwrap();
            assert!(est.z(butterfly_area(theta).unwrap()) < 3.0, "θ={theta} {est:?}");
        }
    }

    #[test]
    fn zero_loss_matches_closed_form() {
        for theta in [0.1, 0.3] {
            let est = mc_zero_loss_probability(theta, 200_000, 5).unwrap();
            assert!(est.z(prob_zero_loss(theta).unwrap()) < 3.0, "θ={theta} {est:?}");
        }
    }
}
