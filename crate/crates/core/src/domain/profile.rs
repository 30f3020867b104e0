use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Beta, LogNormal};
use serde::{Deserialize, Serialize};

use super::{MonitoringSample, NodeId};
use crate::error::{Error, Result};

/// TDP classes a synthetic node can belong to, in watts.
pub const TDP_CHOICES_W: [f64; 4] = [35.0, 65.0, 95.0, 125.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    /// Beta distribution with the given mean and concentration `alpha + beta`.
    pub fn with_mean(mean: f64, concentration: f64) -> Self {
        BetaParams {
            alpha: mean * concentration,
            beta: (1.0 - mean) * concentration,
        }
    }

    fn dist(&self) -> Result<Beta<f64>> {
        Beta::new(self.alpha, self.beta).map_err(|e| Error::Config(format!("beta: {e}")))
    }
}

/// Parameters of `exp(N(mu, sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

impl LogNormalParams {
    pub fn with_median(median: f64, sigma: f64) -> Self {
        LogNormalParams {
            mu: median.ln(),
            sigma,
        }
    }

    fn dist(&self) -> Result<LogNormal<f64>> {
        LogNormal::new(self.mu, self.sigma).map_err(|e| Error::Config(format!("lognormal: {e}")))
    }
}

/// Static draw distributions for one node's monitoring stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub node_id: NodeId,
    pub cpu_tdp_w: f64,
    pub cpu_usage: BetaParams,
    pub mem_usage: BetaParams,
    pub cpi: LogNormalParams,
    pub bandwidth_kbps: LogNormalParams,
    /// Base CPU time; a draw is scaled by `0.5 + cpu_usage`.
    pub cpu_time_s: LogNormalParams,
    /// Probability that a winner label in this node's local copy of the
    /// history points at the wrong record.
    pub label_noise: f64,
    /// Reserved. Always true.
    pub honest: bool,
}

impl NodeProfile {
    /// A heterogeneous profile drawn from `rng`.
    pub fn random<R: Rng + ?Sized>(node_id: NodeId, rng: &mut R) -> Self {
        let tdp = *TDP_CHOICES_W.choose(rng).expect("non-empty");
        NodeProfile {
            node_id,
            cpu_tdp_w: tdp,
            cpu_usage: BetaParams::with_mean(rng.random_range(0.2..0.8), 8.0),
            mem_usage: BetaParams::with_mean(rng.random_range(0.2..0.8), 8.0),
            cpi: LogNormalParams::with_median(rng.random_range(0.8..2.0), 0.2),
            bandwidth_kbps: LogNormalParams::with_median(rng.random_range(5_000.0..25_000.0), 0.6),
            cpu_time_s: LogNormalParams::with_median(rng.random_range(1.0..6.0), 0.3),
            label_noise: rng.random_range(0.0..0.5),
            honest: true,
        }
    }

    /// A node built to win the labeling rule most of the time: low TDP, idle,
    /// short CPU time and a fat uplink.
    pub fn planted_winner(node_id: NodeId) -> Self {
        NodeProfile {
            node_id,
            cpu_tdp_w: 35.0,
            cpu_usage: BetaParams::with_mean(0.1, 20.0),
            mem_usage: BetaParams::with_mean(0.3, 8.0),
            cpi: LogNormalParams::with_median(0.9, 0.1),
            bandwidth_kbps: LogNormalParams::with_median(45_000.0, 0.25),
            cpu_time_s: LogNormalParams::with_median(0.8, 0.2),
            label_noise: 0.0,
            honest: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::Config(format!(
                "node {} profile: {what}",
                self.node_id
            )))
        };
        if !(self.cpu_tdp_w.is_finite() && self.cpu_tdp_w > 0.0) {
            return bad("cpu_tdp_w must be > 0");
        }
        for (name, p) in [("cpu_usage", self.cpu_usage), ("mem_usage", self.mem_usage)] {
            if !(p.alpha > 0.0 && p.beta > 0.0) {
                return bad(&format!("{name} beta parameters must be > 0"));
            }
        }
        for (name, p) in [
            ("cpi", self.cpi),
            ("bandwidth_kbps", self.bandwidth_kbps),
            ("cpu_time_s", self.cpu_time_s),
        ] {
            if !(p.mu.is_finite() && p.sigma.is_finite() && p.sigma >= 0.0) {
                return bad(&format!(
                    "{name} lognormal parameters must be finite, sigma >= 0"
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return bad("label_noise must be in [0, 1]");
        }
        Ok(())
    }

    /// Draws one sample. Every field satisfies the sample invariants by
    /// construction (beta support is [0, 1], lognormal support is positive).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MonitoringSample> {
        let usage = self.cpu_usage.dist()?.sample(rng);
        let mem = self.mem_usage.dist()?.sample(rng);
        let cpi = self.cpi.dist()?.sample(rng);
        let bw = self.bandwidth_kbps.dist()?.sample(rng);
        let t = self.cpu_time_s.dist()?.sample(rng) * (0.5 + usage);
        Ok(MonitoringSample {
            node_id: self.node_id,
            cpu_tdp_w: self.cpu_tdp_w,
            cpu_usage: usage,
            mem_usage: mem,
            cpi,
            bandwidth_kbps: bw,
            cpu_time_s: t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::validate_sample;
    use crate::rng::seeded;

    #[test]
    fn draws_satisfy_sample_invariants() {
        let mut rng = seeded(7);
        for i in 0..20 {
            let p = NodeProfile::random(NodeId(i), &mut rng);
            p.validate().unwrap();
            for _ in 0..50 {
                let s = p.draw(&mut rng).unwrap();
                assert!(validate_sample(&s).is_ok(), "{s:?}");
                assert_eq!(s.node_id, NodeId(i));
            }
        }
        NodeProfile::planted_winner(NodeId(3)).validate().unwrap();
    }

    #[test]
    fn bad_profile_rejected() {
        let mut p = NodeProfile::planted_winner(NodeId(0));
        p.label_noise = 2.0;
        assert!(p.validate().is_err());
    }
}
