use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    accuracy, fedavg, train_local_traced, EvalSet, FeatureScaler, ModelConfig, ModelParams,
};
use crate::domain::{label_records, LabeledRecord, NodeProfile};
use crate::error::{Error, Result};
use crate::rng::{derive_indexed, stream};

/// Offline federated training over a labeled trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FederatedConfig {
    /// Number of participants; group `g` of the trace is held by `g % nodes`.
    pub nodes: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    /// Trailing share of groups held out for evaluation.
    pub test_fraction: f64,
    pub reference_window: usize,
    pub seed: u64,
}

impl Default for FederatedConfig {
    fn default() -> Self {
        FederatedConfig {
            nodes: 10,
            rounds: 10,
            local_epochs: 5,
            test_fraction: 0.2,
            reference_window: 10,
            seed: 42,
        }
    }
}

impl FederatedConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0
            || self.rounds == 0
            || self.local_epochs == 0
            || self.reference_window == 0
        {
            return Err(Error::Config("federated: counts must be >= 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(
                "federated: test_fraction must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub model: ModelParams,
    pub test: EvalSet,
    /// Held-out accuracy after each federation round.
    pub round_accuracy: Vec<f64>,
    /// Mean first and last local epoch loss, per round.
    pub round_losses: Vec<(f64, f64)>,
}

impl FederatedRun {
    pub fn accuracy(&self) -> f64 {
        *self.round_accuracy.last().expect("at least one round")
    }
}

fn winners(groups: &[Vec<LabeledRecord>]) -> Result<Vec<crate::domain::MonitoringSample>> {
    groups
        .iter()
        .map(|g| {
            g.iter()
                .find(|r| r.is_winner)
                .map(|r| r.sample)
                .ok_or_else(|| Error::Domain("group without a winner".into()))
        })
        .collect()
}

/// Trains a global model by repeated local training and FedAvg on the
/// leading groups, scoring it on the trailing ones.
pub fn train_federated(
    groups: &[Vec<LabeledRecord>],
    model: &ModelConfig,
    cfg: &FederatedConfig,
) -> Result<FederatedRun> {
    cfg.validate()?;
    let n_test = ((groups.len() as f64) * cfg.test_fraction).round() as usize;
    if n_test == 0 || n_test >= groups.len() {
        return Err(Error::Domain(format!(
            "{} groups are too few to split",
            groups.len()
        )));
    }
    let (train, test) = groups.split_at(groups.len() - n_test);
    let shards: Vec<Vec<LabeledRecord>> = (0..cfg.nodes)
        .map(|k| {
            train
                .iter()
                .skip(k)
                .step_by(cfg.nodes)
                .flatten()
                .copied()
                .collect()
        })
        .collect();
    if shards.iter().any(Vec::is_empty) {
        return Err(Error::Domain(format!(
            "{} training groups cannot feed {} nodes",
            train.len(),
            cfg.nodes
        )));
    }
    let scaler = FeatureScaler::fit(train.iter().flatten().map(|r| &r.sample))?;
    let mut global = ModelParams::init(model, scaler, &mut stream(cfg.seed, "model-init"))?;
    let test = EvalSet {
        rounds: test.to_vec(),
        reference_winners: winners(&train[train.len().saturating_sub(cfg.reference_window)..])?,
    };
    test.validate()?;
    let mut round_accuracy = Vec::with_capacity(cfg.rounds);
    let mut round_losses = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let mut locals = Vec::with_capacity(cfg.nodes);
        let (mut first, mut last) = (0.0, 0.0);
        for (k, shard) in shards.iter().enumerate() {
            let local_cfg = ModelConfig {
                epochs: cfg.local_epochs,
                seed: derive_indexed(cfg.seed, "federated", (round * cfg.nodes + k) as u64),
                ..model.clone()
            };
            let (m, losses) = train_local_traced(shard, &global, &local_cfg)?;
            first += losses[0];
            last += losses[losses.len() - 1];
            locals.push(m);
        }
        global = fedavg(&locals)?;
        let acc = accuracy(&global, &test)?;
        log::debug!("federated round {round}: accuracy {acc:.4}");
        round_accuracy.push(acc);
        round_losses.push((first / cfg.nodes as f64, last / cfg.nodes as f64));
    }
    Ok(FederatedRun {
        model: global,
        test,
        round_accuracy,
        round_losses,
    })
}

/// Accuracy of an untrained model on rounds whose winner is drawn
/// uniformly at random, i.e. the chance level a trained model must beat.
pub fn uniform_guess_baseline(
    profiles: &[NodeProfile],
    rounds: usize,
    model: &ModelConfig,
    seed: u64,
) -> Result<f64> {
    if profiles.len() < 2 || rounds == 0 {
        return Err(Error::Config(
            "baseline needs >= 2 nodes and >= 1 round".into(),
        ));
    }
    let mut rng = stream(seed, "uniform-baseline");
    let mut eval_rounds = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let group = profiles
            .iter()
            .map(|p| p.draw(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        let mut records = label_records(&group);
        let winner = rng.random_range(0..records.len());
        records
            .iter_mut()
            .enumerate()
            .for_each(|(i, r)| r.is_winner = i == winner);
        eval_rounds.push(records);
    }
    let scaler = FeatureScaler::fit(eval_rounds.iter().flatten().map(|r| &r.sample))?;
    let params = ModelParams::init(model, scaler, &mut stream(seed, "baseline-init"))?;
    let reference: Vec<_> = eval_rounds
        .iter()
        .take(10)
        .flat_map(|g| g.iter().find(|r| r.is_winner))
        .map(|r| r.sample)
        .collect();
    let eval = EvalSet {
        rounds: eval_rounds,
        reference_winners: reference,
    };
    accuracy(&params, &eval)
}
