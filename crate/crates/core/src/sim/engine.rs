use rand::seq::index;
use rand::Rng;

use super::config::{EngineKind, SimConfig};
use super::network::NetworkModel;
use super::outcome::RoundOutcome;
use crate::domain::{digest, label_records, Chain, LabeledRecord, MonitoringSample, NodeProfile};
use crate::error::{Error, Result};
use crate::recommender::{EvalSet, FeatureScaler, ModelConfig, ModelParams};
use crate::rng::{derive_indexed, indexed_stream, stream};
use crate::trace::{default_profiles, load_trace};

/// One consensus protocol. Engines decide a round from the shared state
/// and the current monitoring snapshot; the driver commits the block.
pub trait ConsensusEngine {
    fn kind(&self) -> EngineKind;

    fn run_round(
        &mut self,
        state: &mut SimState,
        round: usize,
        samples: &[MonitoringSample],
    ) -> Result<RoundOutcome>;
}

/// Shared, engine-independent simulation state.
#[derive(Debug, Clone)]
pub struct SimState {
    pub cfg: SimConfig,
    pub profiles: Vec<NodeProfile>,
    /// Rule-labeled rounds, one record per node in node order.
    pub history: Vec<Vec<LabeledRecord>>,
    pub global: ModelParams,
    /// Untrained model every node starts from.
    pub init_model: ModelParams,
    pub chain: Chain,
    pub stakes: Vec<f64>,
    pub network: NetworkModel,
    pub clock_s: f64,
}

fn resolve_profiles(cfg: &SimConfig) -> Vec<NodeProfile> {
    let mut profiles = if cfg.profiles.is_empty() {
        default_profiles(cfg.nodes, cfg.seed)
    } else {
        cfg.profiles.clone()
    };
    if let Some(p) = cfg.planted_winner {
        profiles[p.index()] = NodeProfile::planted_winner(p);
    }
    profiles
}

fn draw_round(profiles: &[NodeProfile], rng: &mut impl Rng) -> Result<Vec<MonitoringSample>> {
    profiles.iter().map(|p| p.draw(rng)).collect()
}

fn genesis_history(cfg: &SimConfig, profiles: &[NodeProfile]) -> Result<Vec<Vec<LabeledRecord>>> {
    if let Some(path) = &cfg.genesis_trace {
        let records = load_trace(path, Some(cfg.nodes))?;
        let groups: Vec<Vec<LabeledRecord>> = records
            .chunks(cfg.nodes)
            .map(<[LabeledRecord]>::to_vec)
            .collect();
        for (g, group) in groups.iter().enumerate() {
            let in_order = group.len() == cfg.nodes
                && group
                    .iter()
                    .enumerate()
                    .all(|(i, r)| r.sample.node_id.index() == i);
            if !in_order {
                return Err(Error::Config(format!(
                    "{}: group {g} does not hold one record per node in node order",
                    path.display()
                )));
            }
        }
        if groups.len() < cfg.aicons.genesis_rounds {
            return Err(Error::Config(format!(
                "{}: {} groups, at least {} needed",
                path.display(),
                groups.len(),
                cfg.aicons.genesis_rounds
            )));
        }
        return Ok(groups);
    }
    (0..cfg.aicons.genesis_rounds)
        .map(|g| {
            Ok(label_records(&draw_round(
                profiles,
                &mut indexed_stream(cfg.seed, "genesis", g as u64),
            )?))
        })
        .collect()
}

fn records_digest(data: &[LabeledRecord]) -> u64 {
    let mut bytes = Vec::with_capacity(data.len() * 41);
    for r in data {
        for f in r.sample.features() {
            bytes.extend_from_slice(&f.to_le_bytes());
        }
        bytes.push(u8::from(r.is_winner));
    }
    digest(&bytes).0
}

impl SimState {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let profiles = resolve_profiles(cfg);
        for p in &profiles {
            p.validate()?;
        }
        let history = genesis_history(cfg, &profiles)?;
        Self::with_history(cfg, profiles, history)
    }

    /// State over an explicit genesis history.
    pub fn with_history(
        cfg: &SimConfig,
        profiles: Vec<NodeProfile>,
        history: Vec<Vec<LabeledRecord>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if profiles.len() != cfg.nodes {
            return Err(Error::Config(format!(
                "{} profiles for {} nodes",
                profiles.len(),
                cfg.nodes
            )));
        }
        let a = &cfg.aicons;
        if history.len() < a.train_window + a.test_window {
            return Err(Error::Config(format!(
                "history of {} rounds is shorter than train_window + test_window",
                history.len()
            )));
        }
        if let Some(g) = history.iter().position(|g| g.len() != cfg.nodes) {
            return Err(Error::Config(format!(
                "history round {g} does not hold one record per node"
            )));
        }
        let scaler = FeatureScaler::fit(history.iter().flatten().map(|r| &r.sample))?;
        let init_model =
            ModelParams::init(&cfg.model, scaler, &mut stream(cfg.seed, "model-init"))?;
        let stakes = if cfg.baseline.initial_stake.is_empty() {
            vec![1.0; cfg.nodes]
        } else {
            cfg.baseline.initial_stake.clone()
        };
        let blob_bytes = init_model.to_blob().len() as f64;
        let network = NetworkModel::new(cfg.timing.latency_ms, blob_bytes, cfg.timing.block_bytes)?;
        Ok(SimState {
            cfg: cfg.clone(),
            profiles,
            history,
            global: init_model.clone(),
            init_model,
            chain: Chain::new(),
            stakes,
            network,
            clock_s: 0.0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.profiles.len()
    }

    /// Every node's monitoring sample for `round`, identical across engines.
    pub fn draw_samples(&self, round: usize) -> Result<Vec<MonitoringSample>> {
        draw_round(
            &self.profiles,
            &mut indexed_stream(self.cfg.seed, "monitor", round as u64),
        )
    }

    fn test_start(&self) -> usize {
        self.history.len() - self.cfg.aicons.test_window
    }

    /// Node `node`'s private training set for `round`: the training window
    /// of the history, subsampled to `records_per_round` per round and with
    /// the node's label noise applied.
    pub fn local_data(&self, node: usize, round: usize) -> Vec<LabeledRecord> {
        let a = &self.cfg.aicons;
        let end = self.test_start();
        let start = end - a.train_window;
        let noise = self.profiles[node].label_noise;
        let mut rng = indexed_stream(self.cfg.seed, &format!("local-data/{round}"), node as u64);
        let mut out = Vec::with_capacity(a.train_window * a.records_per_round.min(self.nodes()));
        for group in &self.history[start..end] {
            let winner = group
                .iter()
                .position(|r| r.is_winner)
                .expect("labeled history");
            let mut picked: Vec<usize> = if group.len() <= a.records_per_round {
                (0..group.len()).collect()
            } else {
                let others: Vec<usize> = (0..group.len()).filter(|&i| i != winner).collect();
                let mut p: Vec<usize> =
                    index::sample(&mut rng, others.len(), a.records_per_round - 1)
                        .into_iter()
                        .map(|k| others[k])
                        .collect();
                p.push(winner);
                p.sort_unstable();
                p
            };
            let mut label = winner;
            if rng.random::<f64>() < noise {
                picked.retain(|&i| i != winner);
                label = picked[rng.random_range(0..picked.len())];
                picked.push(winner);
                picked.sort_unstable();
            }
            out.extend(picked.iter().map(|&i| LabeledRecord {
                sample: group[i].sample,
                is_winner: i == label,
            }));
        }
        out
    }

    /// Training config for one node's local run, seeded by the round and
    /// the content of its data so identical data trains identically.
    pub fn local_model_config(
        &self,
        round: usize,
        epochs: usize,
        data: &[LabeledRecord],
    ) -> ModelConfig {
        ModelConfig {
            epochs,
            seed: derive_indexed(self.cfg.seed, "train", round as u64) ^ records_digest(data),
            ..self.cfg.model.clone()
        }
    }

    /// Winners of the most recent `count` history rounds ending at `end`.
    fn winners_before(&self, end: usize, count: usize) -> Vec<MonitoringSample> {
        self.history[end.saturating_sub(count)..end]
            .iter()
            .map(|g| {
                g.iter()
                    .find(|r| r.is_winner)
                    .expect("labeled history")
                    .sample
            })
            .collect()
    }

    /// Reference winners for ranking the current round.
    pub fn ranking_reference(&self) -> Vec<MonitoringSample> {
        self.winners_before(self.history.len(), self.cfg.aicons.reference_window)
    }

    /// Shared test set for the accuracy axis: the latest history rounds,
    /// referenced against the winners just before them.
    pub fn eval_set(&self) -> EvalSet {
        let start = self.test_start();
        EvalSet {
            rounds: self.history[start..].to_vec(),
            reference_winners: self.winners_before(start, self.cfg.aicons.reference_window),
        }
    }

    pub fn shapley_seed(&self, round: usize) -> u64 {
        derive_indexed(self.cfg.seed, "shapley", round as u64)
    }

    pub fn round_rng(&self, name: &str, round: usize) -> crate::rng::SimRng {
        indexed_stream(self.cfg.seed, name, round as u64)
    }

    /// Appends the round's block and folds its snapshot into the history.
    pub fn commit(&mut self, outcome: &RoundOutcome) -> Result<()> {
        let winner = outcome.winner_id.index();
        let sample = *outcome
            .samples
            .get(winner)
            .ok_or_else(|| Error::Domain(format!("winner {winner} has no sample")))?;
        self.clock_s += outcome.elapsed_s;
        let model = outcome.model_digest.unwrap_or_else(|| digest(&[]));
        self.chain
            .append(outcome.tx_committed, sample, model, self.clock_s);
        self.history.push(label_records(&outcome.samples));
        Ok(())
    }
}
