use serde::{Deserialize, Serialize};

use super::fairness::{column_sums, reward_contribution_ratio, std_dev, FairnessRow};
use crate::error::{Error, Result};
use crate::shapley::DimensionMask;
use crate::sim::{run_simulation, RoundOutcome, SimConfig};

/// Which Shapley axes the ablated reward is computed from.
pub type AblationMask = DimensionMask;

/// Masks compared in an ablation sweep, from most to fewest axes.
pub const ABLATION_MASKS: [AblationMask; 4] = [
    DimensionMask::FULL,
    DimensionMask::ACCURACY_ENERGY,
    DimensionMask::ACCURACY_BANDWIDTH,
    DimensionMask::ACCURACY,
];

/// Re-issues every round's reward from contributions collapsed under
/// `mask` and compares the cumulative result with the full contribution.
pub fn ablate_outcomes(
    outcomes: &[RoundOutcome],
    mask: AblationMask,
    budget: f64,
    signed: bool,
) -> Result<Vec<FairnessRow>> {
    mask.validate()?;
    let n = outcomes
        .first()
        .ok_or(Error::Empty("outcome list"))?
        .nodes();
    let mut rewards = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let s = o.shapley.contribution_with_mask(mask)?;
        rewards.push(
            s.iter()
                .map(|v| {
                    if signed {
                        budget * v
                    } else {
                        (budget * v).max(0.0)
                    }
                })
                .collect::<Vec<_>>(),
        );
    }
    let total_reward = column_sums(n, rewards.iter().map(Vec::as_slice));
    let total_contrib = column_sums(n, outcomes.iter().map(RoundOutcome::contribution));
    reward_contribution_ratio(&total_reward, &total_contrib)
}

/// Runs the simulation described by `cfg` and ablates it.
pub fn run_ablation(cfg: &SimConfig, mask: AblationMask) -> Result<Vec<FairnessRow>> {
    mask.validate()?;
    let run = run_simulation(cfg)?;
    ablate_outcomes(&run.outcomes, mask, cfg.budget, cfg.aicons.signed_rewards)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub mask: String,
    pub ratio_std_dev: f64,
    pub rows: Vec<FairnessRow>,
}

/// Ablation over [`ABLATION_MASKS`] on one run.
pub fn ablation_sweep(
    outcomes: &[RoundOutcome],
    budget: f64,
    signed: bool,
) -> Result<Vec<AblationSummary>> {
    ABLATION_MASKS
        .iter()
        .map(|&m| {
            let rows = ablate_outcomes(outcomes, m, budget, signed)?;
            let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
            Ok(AblationSummary {
                mask: m.label(),
                ratio_std_dev: std_dev(&ratios),
                rows,
            })
        })
        .collect()
}
