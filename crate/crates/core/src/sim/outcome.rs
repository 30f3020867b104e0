use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::EngineKind;
use crate::domain::{Digest, MonitoringSample, NodeId};
use crate::error::{Error, Result};
use crate::shapley::ShapleyReport;

/// Everything one consensus round produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round: usize,
    pub engine: EngineKind,
    pub winner_id: NodeId,
    /// Tokens per node, indexed by node id.
    pub rewards: Vec<f64>,
    pub elapsed_s: f64,
    pub tx_committed: u64,
    /// Seconds each node spent computing this round.
    pub busy_s: Vec<f64>,
    pub energy_spent_j: Vec<f64>,
    /// Monitoring snapshot the round was decided on.
    pub samples: Vec<MonitoringSample>,
    pub shapley: ShapleyReport,
    /// Test accuracy of each node's own model, for engines that train.
    pub node_accuracy: Option<Vec<f64>>,
    pub model_digest: Option<Digest>,
}

impl RoundOutcome {
    pub fn nodes(&self) -> usize {
        self.rewards.len()
    }

    pub fn contribution(&self) -> &[f64] {
        &self.shapley.contribution
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn rewarded_nodes(&self) -> Vec<NodeId> {
        (0..self.nodes())
            .filter(|&i| self.rewards[i] > 0.0)
            .map(NodeId::from)
            .collect()
    }
}

/// Committed transactions per simulated second.
pub fn throughput(outcomes: &[RoundOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Empty("outcome list"));
    }
    let tx: u64 = outcomes.iter().map(|o| o.tx_committed).sum();
    let t: f64 = outcomes.iter().map(|o| o.elapsed_s).sum();
    Ok(tx as f64 / t)
}

/// `round,engine,winner_id,elapsed_s,tx,reward_<id>...`
pub fn write_outcomes_csv<W: Write>(w: W, outcomes: &[RoundOutcome]) -> Result<()> {
    let n = outcomes.first().map_or(0, RoundOutcome::nodes);
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["round", "engine", "winner_id", "elapsed_s", "tx"]
        .map(String::from)
        .to_vec();
    header.extend((0..n).map(|i| format!("reward_{i}")));
    csv.write_record(&header)?;
    for o in outcomes {
        let mut row = vec![
            o.round.to_string(),
            o.engine.to_string(),
            o.winner_id.to_string(),
            o.elapsed_s.to_string(),
            o.tx_committed.to_string(),
        ];
        row.extend(o.rewards.iter().map(f64::to_string));
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::{ConsensusOrder, DimensionMask, ShapleyMatrix};

    pub(crate) fn outcome(round: usize, tx: u64, elapsed: f64) -> RoundOutcome {
        let shapley = ShapleyReport::from_evaluators(
            vec![
                ShapleyMatrix {
                    rows: vec![[0.0, 0.5, 0.5], [0.0, 0.5, 0.5]]
                };
                2
            ],
            DimensionMask::ENERGY_BANDWIDTH,
            ConsensusOrder::NormalizeFirst,
        )
        .unwrap();
        RoundOutcome {
            round,
            engine: EngineKind::Pow,
            winner_id: NodeId(1),
            rewards: vec![0.0, 1.0],
            elapsed_s: elapsed,
            tx_committed: tx,
            busy_s: vec![elapsed; 2],
            energy_spent_j: vec![0.0; 2],
            samples: Vec::new(),
            shapley,
            node_accuracy: None,
            model_digest: None,
        }
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(&[outcome(0, 100, 2.0)]).unwrap(), 50.0);
        assert_eq!(
            throughput(&[outcome(0, 200, 2.0)]).unwrap(),
            2.0 * throughput(&[outcome(0, 100, 2.0)]).unwrap()
        );
        assert!(throughput(&[]).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_outcomes_csv(&mut buf, &[outcome(0, 100, 2.5)]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "round,engine,winner_id,elapsed_s,tx,reward_0,reward_1\n0,pow,1,2.5,100,0,1\n"
        );
    }
}
