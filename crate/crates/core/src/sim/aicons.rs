use super::config::EngineKind;
use super::engine::{ConsensusEngine, SimState};
use super::outcome::RoundOutcome;
use crate::domain::{digest, label_group, MonitoringSample, NodeId};
use crate::error::{Error, Result};
use crate::recommender::{
    accuracy, fedavg, rank_nodes, reference_embedding, train_local, ModelParams,
};
use crate::shapley::{
    energy_of_node, AccuracyInputs, CoalitionInputs, DimensionMask, ShapleyReport,
};

/// The seven-step AI-driven round followed by Shapley reward sharing.
#[derive(Debug, Default, Clone, Copy)]
pub struct AiconsEngine;

/// Per-node energies and bandwidths of a snapshot.
pub(crate) fn resource_inputs(samples: &[MonitoringSample]) -> Result<(Vec<f64>, Vec<f64>)> {
    let energy = samples
        .iter()
        .map(|s| energy_of_node(s.cpu_tdp_w, s.cpu_time_s))
        .collect::<Result<Vec<_>>>()?;
    Ok((energy, samples.iter().map(|s| s.bandwidth_kbps).collect()))
}

/// `budget * s`, clamped at zero unless signed rewards are requested.
pub(crate) fn shapley_rewards(contribution: &[f64], budget: f64, signed: bool) -> Vec<f64> {
    contribution
        .iter()
        .map(|s| {
            if signed {
                budget * s
            } else {
                (budget * s).max(0.0)
            }
        })
        .collect()
}

impl AiconsEngine {
    fn train_all(state: &SimState, round: usize) -> Result<(Vec<ModelParams>, Vec<f64>)> {
        let epochs = state.cfg.aicons.local_epochs;
        let mut models = Vec::with_capacity(state.nodes());
        let mut seconds = Vec::with_capacity(state.nodes());
        for node in 0..state.nodes() {
            let data = state.local_data(node, round);
            let cfg = state.local_model_config(round, epochs, &data);
            models.push(train_local(&data, &state.global, &cfg)?);
            seconds.push(state.cfg.timing.c_train_s * epochs as f64 * data.len() as f64);
        }
        Ok((models, seconds))
    }
}

impl ConsensusEngine for AiconsEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::Aicons
    }

    fn run_round(
        &mut self,
        state: &mut SimState,
        round: usize,
        samples: &[MonitoringSample],
    ) -> Result<RoundOutcome> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::Empty("live node set"));
        }
        let timing = state.cfg.timing.clone();

        // Steps 1-2: local data and training from the current global model.
        let (locals, train_s) = Self::train_all(state, round)?;
        // Step 3: every node broadcasts its model.
        let ready: Vec<f64> = train_s
            .iter()
            .zip(samples)
            .map(|(t, s)| t + state.network.model_broadcast_s(s.bandwidth_kbps))
            .collect();
        // Step 4: each node merges the same set of models.
        let global = fedavg(&locals)?;
        // Step 5: rank the live nodes against recent winners.
        let reference = reference_embedding(&global, &state.ranking_reference())?;
        let ranking = rank_nodes(&global, samples, &reference)?;
        let winner = if round < state.cfg.aicons.bootstrap_rounds {
            samples[label_group(samples).expect("non-empty")].node_id
        } else {
            ranking[0].0
        };
        let infer_s = timing.c_infer_s * n as f64;
        // Steps 6-7: the winner writes the model into its block and broadcasts it.
        let model_digest = digest(&global.to_blob());
        let propagate = state
            .network
            .block_broadcast_s(samples[winner.index()].bandwidth_kbps, true);
        let elapsed_s = ready.iter().copied().fold(0.0, f64::max) + infer_s + propagate;

        let eval = state.eval_set();
        let node_accuracy = locals
            .iter()
            .map(|m| accuracy(m, &eval))
            .collect::<Result<Vec<_>>>()?;
        let (energy_j, bandwidth_kbps) = resource_inputs(samples)?;
        let inputs = CoalitionInputs {
            accuracy: Some(AccuracyInputs {
                models: locals,
                eval,
            }),
            energy_j,
            bandwidth_kbps,
        };
        let shapley = ShapleyReport::honest(
            &inputs,
            &state.cfg.shapley,
            DimensionMask::FULL,
            state.shapley_seed(round),
        )?;
        let rewards = shapley_rewards(
            &shapley.contribution,
            state.cfg.budget,
            state.cfg.aicons.signed_rewards,
        );

        let busy_s: Vec<f64> = train_s.iter().map(|t| t + infer_s).collect();
        let energy_spent_j = busy_s
            .iter()
            .zip(samples)
            .map(|(b, s)| b * s.cpu_tdp_w)
            .collect();
        state.global = global;
        Ok(RoundOutcome {
            round,
            engine: EngineKind::Aicons,
            winner_id: NodeId::from(winner.index()),
            rewards,
            elapsed_s,
            tx_committed: state.cfg.block_tx_capacity,
            busy_s,
            energy_spent_j,
            samples: samples.to_vec(),
            shapley,
            node_accuracy: Some(node_accuracy),
            model_digest: Some(model_digest),
        })
    }
}
