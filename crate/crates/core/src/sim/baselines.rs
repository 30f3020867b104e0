//! Simplified comparison protocols. Each one is a small calibration model
//! with a couple of timing constants, not a faithful reimplementation.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp, Normal};

use super::aicons::resource_inputs;
use super::config::EngineKind;
use super::engine::{ConsensusEngine, SimState};
use super::outcome::RoundOutcome;
use crate::domain::{digest, MonitoringSample, NodeId};
use crate::error::{Error, Result};
use crate::recommender::{accuracy, fedavg, train_local, ModelParams};
use crate::rng::stream;
use crate::shapley::{AccuracyInputs, CoalitionInputs, DimensionMask, ShapleyReport};

fn weighted_pick(weights: &[f64], rng: &mut impl Rng) -> Result<usize> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| Error::Domain(format!("weighted selection: {e}")))?;
    Ok(dist.sample(rng))
}

/// Contribution of nodes that do no learning: energy and bandwidth only.
fn resource_shapley(
    state: &SimState,
    round: usize,
    samples: &[MonitoringSample],
) -> Result<ShapleyReport> {
    let (energy_j, bandwidth_kbps) = resource_inputs(samples)?;
    let inputs = CoalitionInputs {
        accuracy: None,
        energy_j,
        bandwidth_kbps,
    };
    ShapleyReport::honest(
        &inputs,
        &state.cfg.shapley,
        DimensionMask::ENERGY_BANDWIDTH,
        state.shapley_seed(round),
    )
}

struct Decision {
    winner: usize,
    rewards: Vec<f64>,
    elapsed_s: f64,
    busy_s: Vec<f64>,
    shapley: ShapleyReport,
    node_accuracy: Option<Vec<f64>>,
    model_digest: Option<crate::domain::Digest>,
}

fn outcome(
    engine: EngineKind,
    state: &SimState,
    round: usize,
    samples: &[MonitoringSample],
    d: Decision,
) -> RoundOutcome {
    let energy_spent_j = d
        .busy_s
        .iter()
        .zip(samples)
        .map(|(b, s)| b * s.cpu_tdp_w)
        .collect();
    RoundOutcome {
        round,
        engine,
        winner_id: NodeId::from(d.winner),
        rewards: d.rewards,
        elapsed_s: d.elapsed_s,
        tx_committed: state.cfg.block_tx_capacity,
        busy_s: d.busy_s,
        energy_spent_j,
        samples: samples.to_vec(),
        shapley: d.shapley,
        node_accuracy: d.node_accuracy,
        model_digest: d.model_digest,
    }
}

fn winner_takes_all(n: usize, winner: usize, budget: f64) -> Vec<f64> {
    let mut r = vec![0.0; n];
    r[winner] = budget;
    r
}

/// Hash-rate lottery: winner drawn in proportion to `tdp * cpu_usage`,
/// solve time exponential. Every node mines for the whole round.
#[derive(Debug, Default, Clone, Copy)]
pub struct PowEngine;

impl ConsensusEngine for PowEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Pow
    }

    fn run_round(
        &mut self,
        state: &mut SimState,
        round: usize,
        samples: &[MonitoringSample],
    ) -> Result<RoundOutcome> {
        let n = samples.len();
        let hash_rate: Vec<f64> = samples
            .iter()
            .map(|s| s.cpu_tdp_w * s.cpu_usage.max(1e-6))
            .collect();
        let winner = weighted_pick(&hash_rate, &mut state.round_rng("pow-winner", round))?;
        let mean = state.cfg.timing.pow_mean_solve_s;
        let exp =
            Exp::new(1.0 / mean).map_err(|e| Error::Config(format!("pow solve time: {e}")))?;
        let solve_s = exp.sample(&mut state.round_rng("pow-solve", round));
        let elapsed_s = solve_s
            + state
                .network
                .block_broadcast_s(samples[winner].bandwidth_kbps, false);
        let d = Decision {
            winner,
            rewards: winner_takes_all(n, winner, state.cfg.budget),
            elapsed_s,
            busy_s: vec![solve_s; n],
            shapley: resource_shapley(state, round, samples)?,
            node_accuracy: None,
            model_digest: None,
        };
        Ok(outcome(EngineKind::Pow, state, round, samples, d))
    }
}

/// Stake-weighted lottery; rewards compound into stake.
#[derive(Debug, Default, Clone, Copy)]
pub struct PosEngine;

impl ConsensusEngine for PosEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Pos
    }

    fn run_round(
        &mut self,
        state: &mut SimState,
        round: usize,
        samples: &[MonitoringSample],
    ) -> Result<RoundOutcome> {
        let n = samples.len();
        let winner = weighted_pick(&state.stakes, &mut state.round_rng("pos-winner", round))?;
        let t = &state.cfg.timing;
        let select_s = t.pos_base_s + t.pos_per_node_s * n as f64;
        let elapsed_s = select_s
            + state
                .network
                .block_broadcast_s(samples[winner].bandwidth_kbps, false);
        let rewards = winner_takes_all(n, winner, state.cfg.budget);
        state.stakes[winner] += rewards[winner];
        let d = Decision {
            winner,
            rewards,
            elapsed_s,
            busy_s: vec![select_s; n],
            shapley: resource_shapley(state, round, samples)?,
            node_accuracy: None,
            model_digest: None,
        };
        Ok(outcome(EngineKind::Pos, state, round, samples, d))
    }
}

/// Static devotion scores with per-round jitter; the top validators share
/// the budget and the best of them proposes the block.
#[derive(Debug, Clone)]
pub struct PodEngine {
    devotion: Vec<f64>,
}

impl PodEngine {
    pub fn new(state: &SimState) -> Self {
        let mut rng = stream(state.cfg.seed, "devotion");
        PodEngine {
            devotion: (0..state.nodes()).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn devotion(&self) -> &[f64] {
        &self.devotion
    }
}

impl ConsensusEngine for PodEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Pod
    }

    fn run_round(
        &mut self,
        state: &mut SimState,
        round: usize,
        samples: &[MonitoringSample],
    ) -> Result<RoundOutcome> {
        let n = samples.len();
        let k = state.cfg.baseline.pod_validators;
        let jitter = Normal::new(0.0, state.cfg.baseline.pod_jitter)
            .map_err(|e| Error::Config(format!("pod jitter: {e}")))?;
        let mut rng = state.round_rng("pod", round);
        let mut scored: Vec<(usize, f64)> = self
            .devotion
            .iter()
            .map(|d| d + jitter.sample(&mut rng))
            .enumerate()
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut rewards = vec![0.0; n];
        for &(i, _) in &scored[..k] {
            rewards[i] = state.cfg.budget / k as f64;
        }
        let winner = scored[0].0;
        let t = &state.cfg.timing;
        let select_s = t.pod_base_s + t.pod_per_node_s * n as f64;
        let elapsed_s = select_s
            + state
                .network
                .block_broadcast_s(samples[winner].bandwidth_kbps, false);
        let d = Decision {
            winner,
            rewards,
            elapsed_s,
            busy_s: vec![select_s; n],
            shapley: resource_shapley(state, round, samples)?,
            node_accuracy: None,
            model_digest: None,
        };
        Ok(outcome(EngineKind::Pod, state, round, samples, d))
    }
}

/// Fixed groups train from scratch each round; the group whose averaged
/// model is most accurate shares the budget. Nodes left over after forming
/// full groups sit out.
#[derive(Debug, Default, Clone, Copy)]
pub struct PoflEngine;

impl PoflEngine {
    pub fn groups(nodes: usize, size: usize) -> Vec<Vec<usize>> {
        (0..nodes / size)
            .map(|g| (g * size..(g + 1) * size).collect())
            .collect()
    }
}

impl ConsensusEngine for PoflEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Pofl
    }

    fn run_round(
        &mut self,
        state: &mut SimState,
        round: usize,
        samples: &[MonitoringSample],
    ) -> Result<RoundOutcome> {
        let n = samples.len();
        let groups = Self::groups(n, state.cfg.baseline.pofl_group_size);
        if groups.len() < 2 {
            return Err(Error::Config("PoFL needs at least 2 groups".into()));
        }
        let epochs = state.cfg.baseline.pofl_epochs;
        let timing = state.cfg.timing.clone();
        let eval = state.eval_set();
        let mut models: Vec<ModelParams> = vec![state.init_model.clone(); n];
        let mut busy_s = vec![0.0; n];
        let mut ready = vec![0.0; n];
        for &node in groups.iter().flatten() {
            let data = state.local_data(node, round);
            let cfg = state.local_model_config(round, epochs, &data);
            models[node] = train_local(&data, &state.init_model, &cfg)?;
            busy_s[node] = timing.c_train_s * epochs as f64 * data.len() as f64;
            ready[node] = busy_s[node]
                + state
                    .network
                    .model_broadcast_s(samples[node].bandwidth_kbps);
        }
        let mut best: Option<(usize, f64, ModelParams)> = None;
        for (g, members) in groups.iter().enumerate() {
            let group_model = fedavg(
                &members
                    .iter()
                    .map(|&i| models[i].clone())
                    .collect::<Vec<_>>(),
            )?;
            let acc = accuracy(&group_model, &eval)?;
            if best.as_ref().is_none_or(|b| acc > b.1) {
                best = Some((g, acc, group_model));
            }
        }
        let (g, _, group_model) = best.expect("at least two groups");
        let members = &groups[g];
        let mut rewards = vec![0.0; n];
        for &i in members {
            rewards[i] = state.cfg.budget / members.len() as f64;
        }
        let winner = members[0];
        let infer_s = timing.c_infer_s * n as f64;
        let elapsed_s = ready.iter().copied().fold(0.0, f64::max)
            + infer_s
            + state
                .network
                .block_broadcast_s(samples[winner].bandwidth_kbps, true);
        let node_accuracy = models
            .iter()
            .map(|m| accuracy(m, &eval))
            .collect::<Result<Vec<_>>>()?;
        let (energy_j, bandwidth_kbps) = resource_inputs(samples)?;
        let inputs = CoalitionInputs {
            accuracy: Some(AccuracyInputs { models, eval }),
            energy_j,
            bandwidth_kbps,
        };
        let shapley = ShapleyReport::honest(
            &inputs,
            &state.cfg.shapley,
            DimensionMask::FULL,
            state.shapley_seed(round),
        )?;
        let d = Decision {
            winner,
            rewards,
            elapsed_s,
            busy_s,
            shapley,
            node_accuracy: Some(node_accuracy),
            model_digest: Some(digest(&group_model.to_blob())),
        };
        Ok(outcome(EngineKind::Pofl, state, round, samples, d))
    }
}
