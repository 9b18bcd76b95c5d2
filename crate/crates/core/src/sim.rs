//! Monte Carlo sensor networks.
//!
//! Without a fusion center the sensors sit on a graph (a ring by default) and
//! reach a common decision by repeated local exchanges. With a fusion center
//! their bits go straight to a counting rule. Each trial owns a ChaCha8 stream
//! keyed by `(seed, hypothesis)` and selected by the trial index, so results
//! do not depend on how trials are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binom::FusionRule;
use crate::error::{check_sensors, DdnError, Result};
use crate::model::ObservationModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn is_alternative(self) -> bool {
        matches!(self, Hypothesis::H1)
    }
}

/// Undirected sensor graph as neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Ring `0 - 1 - ... - (K-1) - 0`. Two sensors share one link; one sensor
    /// has none.
    pub fn ring(sensors: usize) -> Result<Self> {
        check_sensors(sensors as u64)?;
        let neighbors = (0..sensors)
            .map(|i| match sensors {
                1 => vec![],
                2 => vec![1 - i],
                n => vec![(i + n - 1) % n, (i + 1) % n],
            })
            .collect();
        Ok(Self { neighbors })
    }

    /// Arbitrary graph; links must be symmetric, loop-free and connect all nodes.
    pub fn from_neighbors(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        check_sensors(n as u64)?;
        for (i, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= n || j == i {
                    return Err(DdnError::Config(format!("node {i} has invalid neighbor {j}")));
                }
                if !neighbors[j].contains(&i) {
                    return Err(DdnError::Config(format!("link {i} -> {j} is not symmetric")));
                }
            }
        }
        let t = Self { neighbors };
        if !t.is_connected() {
            return Err(DdnError::Config("topology is disconnected".into()));
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// How the sensors of a fusion-free network settle on one bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Protocol {
    /// Every round each node takes the majority of its own bit and its
    /// neighbors' bits. Local ties follow the trial coin.
    #[default]
    LocalMajority,
    /// Every round each node merges the initial votes known to its neighbors;
    /// once a node knows all votes it takes their majority.
    VoteFlooding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub topology: Topology,
    /// Round budget of the exchange; after it runs out the network falls back
    /// to the direct majority.
    pub rounds: u32,
    pub seed: u64,
    /// Trials per hypothesis.
    pub trials: u64,
    pub protocol: Protocol,
}

impl NetworkConfig {
    /// Ring of `sensors` nodes with a budget of `sensors` rounds.
    pub fn ring(sensors: usize, seed: u64, trials: u64) -> Result<Self> {
        Ok(Self {
            topology: Topology::ring(sensors)?,
            rounds: sensors as u32,
            seed,
            trials,
            protocol: Protocol::default(),
        })
    }

    pub fn with_protocol(mut self, protocol: Protocol) -> Self {
        self.protocol = protocol;
        self
    }

    pub fn sensors(&self) -> usize {
        self.topology.len()
    }
}

/// Direct majority of `bits`; an exact tie returns `kappa`.
pub fn direct_majority(bits: &[bool], kappa: bool) -> bool {
    let ones = bits.iter().filter(|&&b| b).count();
    let n = bits.len();
    match (2 * ones).cmp(&n) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => kappa,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GossipOutcome {
    pub decision: bool,
    /// Round at which all nodes held the same bit (the initial state counts
    /// as round 1), or the budget when the exchange fell back.
    pub rounds: u32,
    /// True when the budget ran out and the direct majority was used.
    pub fallback: bool,
}

fn all_equal(bits: &[bool]) -> Option<bool> {
    let first = *bits.first()?;
    bits.iter().all(|&b| b == first).then_some(first)
}

/// Run the exchange from `initial` local decisions. `kappa` is the trial coin
/// used for every tie, local or global.
pub fn gossip(topology: &Topology, initial: &[bool], kappa: bool, budget: u32, protocol: Protocol) -> GossipOutcome {
    assert_eq!(topology.len(), initial.len());
    match protocol {
        Protocol::LocalMajority => local_majority(topology, initial, kappa, budget),
        Protocol::VoteFlooding => vote_flooding(topology, initial, kappa, budget),
    }
}

fn local_majority(topology: &Topology, initial: &[bool], kappa: bool, budget: u32) -> GossipOutcome {
    let mut state = initial.to_vec();
    let mut next = state.clone();
    for round in 1..=budget.max(1) {
        if let Some(b) = all_equal(&state) {
            return GossipOutcome {
                decision: b,
                rounds: round,
                fallback: false,
            };
        }
        for (i, slot) in next.iter_mut().enumerate() {
            let nb = topology.neighbors(i);
            let ones = state[i] as usize + nb.iter().filter(|&&j| state[j]).count();
            let total = nb.len() + 1;
            *slot = match (2 * ones).cmp(&total) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => kappa,
            };
        }
        std::mem::swap(&mut state, &mut next);
    }
    match all_equal(&state) {
        Some(b) => GossipOutcome {
            decision: b,
            rounds: budget.max(1),
            fallback: false,
        },
        None => GossipOutcome {
            decision: direct_majority(initial, kappa),
            rounds: budget.max(1),
            fallback: true,
        },
    }
}

fn vote_flooding(topology: &Topology, initial: &[bool], kappa: bool, budget: u32) -> GossipOutcome {
    let n = initial.len();
    let words = n.div_ceil(64);
    let mut known: Vec<Vec<u64>> = (0..n)
        .map(|i| {
            let mut w = vec![0u64; words];
            w[i / 64] |= 1 << (i % 64);
            w
        })
        .collect();
    let full = |w: &[u64]| (0..n).all(|i| w[i / 64] >> (i % 64) & 1 == 1);
    for round in 1..=budget.max(1) {
        if known.iter().all(|w| full(w)) {
            // every node now holds the same vote list
            return GossipOutcome {
                decision: direct_majority(initial, kappa),
                rounds: round,
                fallback: false,
            };
        }
        let prev = known.clone();
        for (i, w) in known.iter_mut().enumerate() {
            for &j in topology.neighbors(i) {
                for (a, b) in w.iter_mut().zip(&prev[j]) {
                    *a |= *b;
                }
            }
        }
    }
    GossipOutcome {
        decision: direct_majority(initial, kappa),
        rounds: budget.max(1),
        fallback: !known.iter().all(|w| full(w)),
    }
}

fn trial_rng(seed: u64, hypothesis: Hypothesis, trial_index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = hypothesis.is_alternative() as u8;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial_index);
    rng
}

fn local_decisions<M: ObservationModel, R: Rng>(model: &M, sensors: usize, hypothesis: Hypothesis, rng: &mut R) -> Vec<bool> {
    (0..sensors)
        .map(|_| model.decide(model.sample(hypothesis.is_alternative(), rng)))
        .collect()
}

/// One trial of the fusion-free network.
pub fn run_wof_trial<M: ObservationModel>(
    model: &M,
    config: &NetworkConfig,
    hypothesis: Hypothesis,
    trial_index: u64,
) -> GossipOutcome {
    let mut rng = trial_rng(config.seed, hypothesis, trial_index);
    let bits = local_decisions(model, config.sensors(), hypothesis, &mut rng);
    let kappa = rng.random_bool(0.5);
    gossip(&config.topology, &bits, kappa, config.rounds, config.protocol)
}

/// One trial of the fusion-center network under `rule`.
pub fn run_wf_trial<M: ObservationModel>(
    model: &M,
    config: &NetworkConfig,
    rule: &FusionRule,
    hypothesis: Hypothesis,
    trial_index: u64,
) -> Result<bool> {
    if rule.sensors() != config.sensors() as u64 {
        return Err(DdnError::Config(format!(
            "rule has {} sensors, network has {}",
            rule.sensors(),
            config.sensors()
        )));
    }
    let mut rng = trial_rng(config.seed, hypothesis, trial_index);
    let bits = local_decisions(model, config.sensors(), hypothesis, &mut rng);
    let alarms = bits.iter().filter(|&&b| b).count() as u64;
    Ok(rule.decide(alarms, |p| rng.random::<f64>() < p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum System {
    Wof,
    Wf(FusionRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub false_alarms: u64,
    pub misses: u64,
    pub trials_h0: u64,
    pub trials_h1: u64,
    pub est_pf: f64,
    pub est_pm: f64,
    pub stderr_pf: f64,
    pub stderr_pm: f64,
    /// Fusion-free trials that exhausted the round budget.
    pub fallbacks: u64,
}

impl TrialStats {
    fn from_counts(false_alarms: u64, misses: u64, trials: u64, fallbacks: u64) -> Self {
        let est = |c: u64| c as f64 / trials as f64;
        let se = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
        let (pf, pm) = (est(false_alarms), est(misses));
        Self {
            false_alarms,
            misses,
            trials_h0: trials,
            trials_h1: trials,
            est_pf: pf,
            est_pm: pm,
            stderr_pf: se(pf),
            stderr_pm: se(pm),
            fallbacks,
        }
    }
}

/// `config.trials` trials under each hypothesis, run in parallel.
pub fn estimate_errors<M: ObservationModel + Sync>(model: &M, config: &NetworkConfig, system: System) -> Result<TrialStats> {
    if config.trials == 0 {
        return Err(DdnError::Contract("trials must be at least 1".into()));
    }
    if let System::Wf(rule) = &system {
        if rule.sensors() != config.sensors() as u64 {
            return Err(DdnError::Config(format!(
                "rule has {} sensors, network has {}",
                rule.sensors(),
                config.sensors()
            )));
        }
    }
    // (wrong decisions, fallbacks) for one hypothesis
    let count = |h: Hypothesis| -> (u64, u64) {
        let wrong_bit = !h.is_alternative();
        (0..config.trials)
            .into_par_iter()
            .map(|i| match &system {
                System::Wof => {
                    let out = run_wof_trial(model, config, h, i);
                    ((out.decision == wrong_bit) as u64, out.fallback as u64)
                }
                System::Wf(rule) => {
                    let d = run_wf_trial(model, config, rule, h, i).expect("rule size checked above");
                    ((d == wrong_bit) as u64, 0)
                }
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    let (false_alarms, fb0) = count(Hypothesis::H0);
    let (misses, fb1) = count(Hypothesis::H1);
    Ok(TrialStats::from_counts(false_alarms, misses, config.trials, fb0 + fb1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianShiftModel;

    fn patterns(n: usize) -> impl Iterator<Item = Vec<bool>> {
        (0u32..1 << n).map(move |m| (0..n).map(|i| m >> i & 1 == 1).collect())
    }

    #[test]
    fn all_equal_agrees_in_one_round() {
        let t = Topology::ring(5).unwrap();
        for b in [false, true] {
            for p in [Protocol::LocalMajority, Protocol::VoteFlooding] {
                let out = gossip(&t, &[b; 5], false, 5, p);
                assert_eq!(out.decision, b);
                if p == Protocol::LocalMajority {
                    assert_eq!(out.rounds, 1);
                }
                assert!(!out.fallback);
            }
        }
    }

    #[test]
    fn small_rings() {
        let t = Topology::ring(3).unwrap();
        assert!(gossip(&t, &[true, true, false], false, 3, Protocol::LocalMajority).decision);
        let t = Topology::ring(1).unwrap();
        assert!(gossip(&t, &[true], false, 1, Protocol::LocalMajority).decision);
        assert!(!gossip(&t, &[false], true, 1, Protocol::LocalMajority).decision);
    }

    #[test]
    fn ring_equals_majority_exhaustively() {
        for n in 1..=9 {
            let t = Topology::ring(n).unwrap();
            for bits in patterns(n) {
                for kappa in [false, true] {
                    let want = direct_majority(&bits, kappa);
                    for p in [Protocol::LocalMajority, Protocol::VoteFlooding] {
                        let out = gossip(&t, &bits, kappa, n as u32, p);
                        assert_eq!(out.decision, want, "K={n} {bits:?} κ={kappa} {p:?}");
                    }
                    let flood = gossip(&t, &bits, kappa, n as u32, Protocol::VoteFlooding);
                    assert!(!flood.fallback);
                }
            }
        }
    }

    #[test]
    fn topology_validation() {
        assert!(Topology::from_neighbors(vec![vec![1], vec![0], vec![]]).is_err());
        assert!(Topology::from_neighbors(vec![vec![1], vec![]]).is_err());
        assert!(Topology::from_neighbors(vec![vec![0]]).is_err());
        let t = Topology::ring(6).unwrap();
        assert!((0..6).all(|i| t.neighbors(i).len() == 2));
    }

    #[test]
    fn wf_trial_rules() {
        let model = GaussianShiftModel::from_theta(0.2).unwrap();
        let cfg = NetworkConfig::ring(3, 7, 1).unwrap();
        let or = FusionRule::counting(3, 0).unwrap();
        let and = FusionRule::counting(3, 2).unwrap();
        for i in 0..200 {
            let mut rng = trial_rng(7, Hypothesis::H1, i);
            let bits = local_decisions(&model, 3, Hypothesis::H1, &mut rng);
            let d_or = run_wf_trial(&model, &cfg, &or, Hypothesis::H1, i).unwrap();
            let d_and = run_wf_trial(&model, &cfg, &and, Hypothesis::H1, i).unwrap();
            assert_eq!(d_or, bits.iter().any(|&b| b));
            assert_eq!(d_and, bits.iter().all(|&b| b));
        }
        let mid = FusionRule::counting(3, 1).unwrap();
        assert!(mid.decide(2, |_| false));
    }

    #[test]
    fn zero_trials_rejected() {
        let model = GaussianShiftModel::from_theta(0.2).unwrap();
        let cfg = NetworkConfig::ring(3, 1, 0).unwrap();
        assert!(matches!(estimate_errors(&model, &cfg, System::Wof), Err(DdnError::Contract(_))));
    }

    #[test]
    fn deterministic() {
        let model = GaussianShiftModel::from_theta(0.3).unwrap();
        let cfg = NetworkConfig::ring(5, 42, 2000).unwrap();
        let a = estimate_errors(&model, &cfg, System::Wof).unwrap();
        let b = estimate_errors(&model, &cfg, System::Wof).unwrap();
        assert_eq!(a, b);
        let c = estimate_errors(&model, &NetworkConfig { seed: 43, ..cfg }, System::Wof).unwrap();
        assert_ne!(a, c);
    }
}
