use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdnError {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("sensor count must be positive")]
    NoSensors,

    #[error("K = {0} is even; the consensus error is defined for odd K only (use consensus_pf for the tie-randomized rule)")]
    EvenSensorCount(u64),

    #[error("threshold k = {k} is invalid for K = {sensors}: {reason}")]
    Threshold {
        sensors: u64,
        k: i64,
        reason: &'static str,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("infeasible costs: threshold ratio {ratio} is not a positive finite number")]
    InfeasibleCosts { ratio: f64 },

    #[error("no intersection of the fusion map with the butterfly edge for K = {sensors}, k = {k}")]
    NoIntersection { sensors: u64, k: u64 },

    #[error("invalid network configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, DdnError>;

pub(crate) fn check_prob(name: &'static str, p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(DdnError::Domain {
            name,
            value: p,
            domain: "[0, 1]",
        })
    }
}

/// Open interval (0, 1/2), the admissible range of the robust operating value.
pub(crate) fn check_theta(theta: f64) -> Result<f64> {
    if theta > 0.0 && theta < 0.5 {
        Ok(theta)
    } else {
        Err(DdnError::Domain {
            name: "theta",
            value: theta,
            domain: "(0, 1/2)",
        })
    }
}

pub(crate) fn check_sensors(k: u64) -> Result<u64> {
    if k == 0 {
        Err(DdnError::NoSensors)
    } else {
        Ok(k)
    }
}

pub(crate) fn check_odd(k: u64) -> Result<u64> {
    check_sensors(k)?;
    if k % 2 == 0 {
        Err(DdnError::EvenSensorCount(k))
    } else {
        Ok(k)
    }
}
