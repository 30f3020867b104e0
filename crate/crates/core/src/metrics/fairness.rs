use serde::{Deserialize, Serialize};

use crate::domain::NodeId;
use crate::error::{Error, Result};
use crate::sim::RoundOutcome;

/// Reward against contribution for one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub node_id: NodeId,
    pub reward: f64,
    pub contribution: f64,
    /// `reward / contribution`, or 0 when the contribution is not positive.
    pub ratio: f64,
    pub degenerate: bool,
}

pub fn reward_contribution_ratio(
    rewards: &[f64],
    contributions: &[f64],
) -> Result<Vec<FairnessRow>> {
    if rewards.len() != contributions.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            actual: contributions.len(),
        });
    }
    Ok(rewards
        .iter()
        .zip(contributions)
        .enumerate()
        .map(|(i, (&reward, &contribution))| {
            let degenerate = contribution.is_nan() || contribution <= 0.0;
            FairnessRow {
                node_id: NodeId::from(i),
                reward,
                contribution,
                ratio: if degenerate {
                    0.0
                } else {
                    reward / contribution
                },
                degenerate,
            }
        })
        .collect())
}

fn node_count(outcomes: &[RoundOutcome]) -> Result<usize> {
    let n = outcomes
        .first()
        .ok_or(Error::Empty("outcome list"))?
        .nodes();
    if let Some(o) = outcomes
        .iter()
        .find(|o| o.nodes() != n || o.contribution().len() != n)
    {
        return Err(Error::Domain(format!(
            "round {} covers a different node set",
            o.round
        )));
    }
    Ok(n)
}

/// Sums per-node vectors over rounds.
pub(crate) fn column_sums<'a>(n: usize, rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for r in rows {
        acc.iter_mut().zip(r).for_each(|(a, v)| *a += v);
    }
    acc
}

/// Ratios of cumulative reward to cumulative contribution over a run.
pub fn cumulative_fairness(outcomes: &[RoundOutcome]) -> Result<Vec<FairnessRow>> {
    let n = node_count(outcomes)?;
    let rewards = column_sums(n, outcomes.iter().map(|o| o.rewards.as_slice()));
    let contrib = column_sums(n, outcomes.iter().map(RoundOutcome::contribution));
    reward_contribution_ratio(&rewards, &contrib)
}

pub fn round_fairness(outcome: &RoundOutcome) -> Result<Vec<FairnessRow>> {
    reward_contribution_ratio(&outcome.rewards, outcome.contribution())
}

/// Population standard deviation.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}
