use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::loss::cosine_slices;
use super::{Embedding, ModelParams};
use crate::domain::{LabeledRecord, MonitoringSample, NodeId};
use crate::error::{Error, Result};

/// Labeled rounds to score a model on, plus the historical winners whose
/// mean embedding stands in for the expected winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSet {
    pub rounds: Vec<Vec<LabeledRecord>>,
    pub reference_winners: Vec<MonitoringSample>,
}

impl EvalSet {
    pub fn validate(&self) -> Result<()> {
        if self.rounds.is_empty() {
            return Err(Error::Empty("test set"));
        }
        if self.reference_winners.is_empty() {
            return Err(Error::Empty("reference winners"));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            let winners = r.iter().filter(|x| x.is_winner).count();
            if winners != 1 {
                return Err(Error::Domain(format!(
                    "test round {i} has {winners} winners, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Mean embedding of recent winners under `params`.
pub fn reference_embedding(
    params: &ModelParams,
    winners: &[MonitoringSample],
) -> Result<Embedding> {
    if winners.is_empty() {
        return Err(Error::Empty("reference winners"));
    }
    let embs = winners
        .iter()
        .map(|w| params.embed(w))
        .collect::<Result<Vec<_>>>()?;
    Embedding::mean(&embs)
}

fn by_score_then_id(a: &(NodeId, f64), b: &(NodeId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Ranks live nodes by cosine similarity to `reference`, highest first, ties
/// to the lowest node id. The first entry is the recommended winner.
pub fn rank_nodes(
    global: &ModelParams,
    current: &[MonitoringSample],
    reference: &Embedding,
) -> Result<Vec<(NodeId, f64)>> {
    if current.is_empty() {
        return Err(Error::Empty("node set"));
    }
    let mut scored = current
        .iter()
        .map(|s| Ok((s.node_id, cosine_slices(&global.embed(s)?.0, &reference.0)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(by_score_then_id);
    Ok(scored)
}

fn top1(params: &ModelParams, round: &[LabeledRecord], reference: &Embedding) -> Result<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    for r in round {
        let cand = (
            r.sample.node_id,
            cosine_slices(&params.embed(&r.sample)?.0, &reference.0)?,
        );
        if best.is_none_or(|b| by_score_then_id(&cand, &b) == Ordering::Less) {
            best = Some(cand);
        }
    }
    best.map(|b| b.0).ok_or(Error::Empty("test round"))
}

/// Fraction of rounds whose top-ranked node is the labeled winner.
pub fn accuracy(params: &ModelParams, eval: &EvalSet) -> Result<f64> {
    eval.validate()?;
    let reference = reference_embedding(params, &eval.reference_winners)?;
    let mut hits = 0usize;
    for round in &eval.rounds {
        let truth = round
            .iter()
            .find(|r| r.is_winner)
            .expect("validated")
            .sample
            .node_id;
        if top1(params, round, &reference)? == truth {
            hits += 1;
        }
    }
    Ok(hits as f64 / eval.rounds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recommender::{FeatureScaler, ModelConfig};
    use crate::rng::seeded;

    fn sample(node: u32, bw: f64) -> MonitoringSample {
        MonitoringSample {
            node_id: NodeId(node),
            cpu_tdp_w: 65.0,
            cpu_usage: 0.5,
            mem_usage: 0.4,
            cpi: 1.2,
            bandwidth_kbps: bw,
            cpu_time_s: 2.0,
        }
    }

    fn model() -> ModelParams {
        ModelParams::init(
            &ModelConfig::default(),
            FeatureScaler::identity(5),
            &mut seeded(9),
        )
        .unwrap()
    }

    #[test]
    fn singleton_is_winner() {
        let m = model();
        let s = sample(4, 100.0);
        let r = reference_embedding(&m, &[sample(0, 5.0)]).unwrap();
        let ranked = rank_nodes(&m, &[s], &r).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].0, NodeId(4));
        assert!((-1.0..=1.0).contains(&ranked[0].1));
    }

    #[test]
    fn identical_samples_tie_to_lower_id() {
        let m = model();
        let r = reference_embedding(&m, &[sample(0, 5.0)]).unwrap();
        let a = sample(7, 100.0);
        let b = MonitoringSample {
            node_id: NodeId(3),
            ..a
        };
        let ranked = rank_nodes(&m, &[a, b], &r).unwrap();
        assert_eq!(ranked[0].0, NodeId(3));
        assert_eq!(ranked[0].1, ranked[1].1);
        assert!(rank_nodes(&m, &[], &r).is_err());
    }

    #[test]
    fn single_node_rounds_are_always_right() {
        let m = model();
        let rounds = (0..5)
            .map(|i| {
                vec![LabeledRecord {
                    sample: sample(i, 10.0 * f64::from(i)),
                    is_winner: true,
                }]
            })
            .collect();
        let eval = EvalSet {
            rounds,
            reference_winners: vec![sample(0, 1.0)],
        };
        assert_eq!(accuracy(&m, &eval).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_rejects_bad_test_sets() {
        let m = model();
        let empty = EvalSet {
            rounds: vec![],
            reference_winners: vec![sample(0, 1.0)],
        };
        assert!(accuracy(&m, &empty).is_err());
        let two = EvalSet {
            rounds: vec![vec![
                LabeledRecord {
                    sample: sample(0, 1.0),
                    is_winner: true,
                },
                LabeledRecord {
                    sample: sample(1, 1.0),
                    is_winner: true,
                },
            ]],
            reference_winners: vec![sample(0, 1.0)],
        };
        assert!(accuracy(&m, &two).is_err());
    }
}
