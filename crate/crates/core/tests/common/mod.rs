#![allow(dead_code)]

use aicons_core::recommender::{EvalSet, FeatureScaler, ModelConfig, ModelParams};
use aicons_core::rng::seeded;
use aicons_core::shapley::{AccuracyInputs, CoalitionInputs};
use aicons_core::trace::{generate_trace, group_records, TraceSpec};

/// Held-out rounds from a small generated trace.
pub fn eval_set(seed: u64) -> (EvalSet, FeatureScaler) {
    let spec = TraceSpec {
        records: 300,
        nodes: 6,
        seed,
        ..TraceSpec::default()
    };
    let records = generate_trace(&spec).unwrap();
    let scaler = FeatureScaler::fit(records.iter().map(|r| &r.sample)).unwrap();
    let groups = group_records(&records, 6);
    let reference = groups[..10]
        .iter()
        .map(|g| g.iter().find(|r| r.is_winner).unwrap().sample)
        .collect();
    (
        EvalSet {
            rounds: groups[10..].to_vec(),
            reference_winners: reference,
        },
        scaler,
    )
}

/// A contribution game with `n` independently initialised models.
pub fn random_game(
    n: usize,
    seed: u64,
    energy_j: Vec<f64>,
    bandwidth_kbps: Vec<f64>,
) -> CoalitionInputs {
    let (eval, scaler) = eval_set(seed);
    let cfg = ModelConfig::default();
    let models = (0..n)
        .map(|i| {
            ModelParams::init(
                &cfg,
                scaler.clone(),
                &mut seeded(seed.wrapping_mul(31).wrapping_add(i as u64)),
            )
            .unwrap()
        })
        .collect();
    CoalitionInputs {
        accuracy: Some(AccuracyInputs { models, eval }),
        energy_j,
        bandwidth_kbps,
    }
}
