use serde::{Deserialize, Serialize};

use super::fairness::column_sums;
use crate::error::{Error, Result};
use crate::sim::SimRun;

pub const ETH_PRICE_AUD: f64 = 1798.68;
pub const DEFAULT_RATE_AUD_PER_KWH: f64 = 0.30;
pub const DEFAULT_HORIZON_S: f64 = 3600.0;
const JOULES_PER_KWH: f64 = 3.6e6;

/// Token income minus electricity cost, in AUD.
pub fn profit(
    reward_tokens: f64,
    price_aud_per_token: f64,
    tdp_w: f64,
    time_s: f64,
    rate_aud_per_kwh: f64,
) -> Result<f64> {
    let inputs = [
        ("reward", reward_tokens),
        ("price", price_aud_per_token),
        ("tdp", tdp_w),
        ("time", time_s),
        ("rate", rate_aud_per_kwh),
    ];
    if let Some((name, v)) = inputs.iter().find(|(_, v)| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(format!(
            "profit input {name} must be finite and non-negative, got {v}"
        )));
    }
    Ok(reward_tokens * price_aud_per_token - tdp_w * time_s / JOULES_PER_KWH * rate_aud_per_kwh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfitConfig {
    pub price_aud_per_token: f64,
    pub rate_aud_per_kwh: f64,
    /// Wall-clock window every engine is compared over.
    pub horizon_s: f64,
}

impl Default for ProfitConfig {
    fn default() -> Self {
        ProfitConfig {
            price_aud_per_token: ETH_PRICE_AUD,
            rate_aud_per_kwh: DEFAULT_RATE_AUD_PER_KWH,
            horizon_s: DEFAULT_HORIZON_S,
        }
    }
}

/// Profit of each node over `cfg.horizon_s` of simulated time, obtained by
/// scaling the run's cumulative reward and busy time to that window.
pub fn node_profits(run: &SimRun, cfg: &ProfitConfig) -> Result<Vec<f64>> {
    if cfg.horizon_s.is_nan() || cfg.horizon_s <= 0.0 {
        return Err(Error::Config("profit horizon must be positive".into()));
    }
    let first = run.outcomes.first().ok_or(Error::Empty("outcome list"))?;
    let n = first.nodes();
    let total_s: f64 = run.outcomes.iter().map(|o| o.elapsed_s).sum();
    if total_s.is_nan() || total_s <= 0.0 {
        return Err(Error::Domain("run covers no simulated time".into()));
    }
    let scale = cfg.horizon_s / total_s;
    let rewards = column_sums(n, run.outcomes.iter().map(|o| o.rewards.as_slice()));
    let busy = column_sums(n, run.outcomes.iter().map(|o| o.busy_s.as_slice()));
    (0..n)
        .map(|i| {
            profit(
                rewards[i] * scale,
                cfg.price_aud_per_token,
                run.profiles[i].cpu_tdp_w,
                busy[i] * scale,
                cfg.rate_aud_per_kwh,
            )
        })
        .collect()
}

pub fn average_profit(run: &SimRun, cfg: &ProfitConfig) -> Result<f64> {
    let p = node_profits(run, cfg)?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(profit(1.0, ETH_PRICE_AUD, 0.0, 0.0, 0.3).unwrap(), 1798.68);
        assert!((profit(0.0, ETH_PRICE_AUD, 65.0, 3600.0, 0.30).unwrap() + 0.0195).abs() < 1e-12);
        assert_eq!(profit(0.0, 0.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_negative_and_nan() {
        assert!(profit(-1.0, 1.0, 0.0, 0.0, 0.0).is_err());
        assert!(profit(1.0, 1.0, 0.0, f64::NAN, 0.0).is_err());
        assert!(profit(1.0, 1.0, 0.0, 0.0, -0.1).is_err());
    }
}
