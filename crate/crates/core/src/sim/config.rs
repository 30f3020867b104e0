use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{NodeId, NodeProfile};
use crate::error::{Error, Result};
use crate::recommender::ModelConfig;
use crate::shapley::ShapleyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Aicons,
    Pow,
    Pos,
    Pod,
    Pofl,
}

impl EngineKind {
    pub const ALL: [EngineKind; 5] = [
        EngineKind::Aicons,
        EngineKind::Pow,
        EngineKind::Pos,
        EngineKind::Pod,
        EngineKind::Pofl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Aicons => "aicons",
            EngineKind::Pow => "pow",
            EngineKind::Pos => "pos",
            EngineKind::Pod => "pod",
            EngineKind::Pofl => "pofl",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EngineKind::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown engine {s:?}; expected one of aicons, pow, pos, pod, pofl"
                ))
            })
    }
}

/// Simulated-time cost model shared by all engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingConfig {
    /// Seconds per record per training epoch.
    pub c_train_s: f64,
    /// Seconds to embed and score one node.
    pub c_infer_s: f64,
    pub latency_ms: f64,
    /// Block size excluding any embedded model.
    pub block_bytes: f64,
    pub pow_mean_solve_s: f64,
    pub pos_base_s: f64,
    pub pos_per_node_s: f64,
    pub pod_base_s: f64,
    pub pod_per_node_s: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            c_train_s: 2e-4,
            c_infer_s: 1e-4,
            latency_ms: 20.0,
            block_bytes: 100_000.0,
            pow_mean_solve_s: 10.0,
            pos_base_s: 0.3,
            pos_per_node_s: 0.02,
            pod_base_s: 0.5,
            pod_per_node_s: 0.03,
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("c_train_s", self.c_train_s),
            ("c_infer_s", self.c_infer_s),
            ("latency_ms", self.latency_ms),
            ("block_bytes", self.block_bytes),
            ("pos_base_s", self.pos_base_s),
            ("pos_per_node_s", self.pos_per_node_s),
            ("pod_base_s", self.pod_base_s),
            ("pod_per_node_s", self.pod_per_node_s),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "timing.{name} must be >= 0, got {v}"
                )));
            }
        }
        if !(self.pow_mean_solve_s.is_finite() && self.pow_mean_solve_s > 0.0) {
            return Err(Error::Config("timing.pow_mean_solve_s must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AiconsConfig {
    /// Rule-labeled rounds available before round 0.
    pub genesis_rounds: usize,
    /// Rounds whose winner comes from the labeling rule.
    pub bootstrap_rounds: usize,
    /// History rounds each node trains on.
    pub train_window: usize,
    /// Most recent history rounds used as the shared test set.
    pub test_window: usize,
    /// Winners averaged into the reference embedding.
    pub reference_window: usize,
    /// Records per history round in a node's local data, winner included.
    pub records_per_round: usize,
    pub local_epochs: usize,
    /// Keep negative rewards instead of clamping them at zero.
    pub signed_rewards: bool,
}

impl Default for AiconsConfig {
    fn default() -> Self {
        AiconsConfig {
            genesis_rounds: 60,
            bootstrap_rounds: 5,
            train_window: 20,
            test_window: 20,
            reference_window: 10,
            records_per_round: 10,
            local_epochs: 5,
            signed_rewards: false,
        }
    }
}

impl AiconsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("aicons: {m}")));
        if self.train_window == 0 || self.test_window == 0 || self.reference_window == 0 {
            return bad("train_window, test_window and reference_window must be >= 1");
        }
        if self.reference_window > self.train_window {
            return bad("reference_window must not exceed train_window");
        }
        if self.genesis_rounds < self.train_window + self.test_window {
            return bad("genesis_rounds must cover train_window + test_window");
        }
        if self.records_per_round < 2 {
            return bad("records_per_round must be >= 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub pod_validators: usize,
    /// Standard deviation of the per-round noise added to devotion scores.
    pub pod_jitter: f64,
    pub pofl_group_size: usize,
    pub pofl_epochs: usize,
    /// Initial PoS stake per node; empty means one token each.
    pub initial_stake: Vec<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            pod_validators: 4,
            pod_jitter: 0.05,
            pofl_group_size: 4,
            pofl_epochs: 60,
            initial_stake: Vec::new(),
        }
    }
}

/// Full, resolved configuration of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub engine: EngineKind,
    pub nodes: usize,
    pub rounds: usize,
    pub seed: u64,
    /// Tokens issued per block.
    pub budget: f64,
    pub block_tx_capacity: u64,
    pub model: ModelConfig,
    pub shapley: ShapleyConfig,
    pub timing: TimingConfig,
    pub aicons: AiconsConfig,
    pub baseline: BaselineConfig,
    /// Explicit node profiles; empty means derived from the seed.
    pub profiles: Vec<NodeProfile>,
    pub planted_winner: Option<NodeId>,
    /// Optional trace whose groups replace the generated genesis history.
    pub genesis_trace: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            engine: EngineKind::Aicons,
            nodes: 10,
            rounds: 50,
            seed: 42,
            budget: 1.0,
            block_tx_capacity: 1000,
            model: ModelConfig::default(),
            shapley: ShapleyConfig::default(),
            timing: TimingConfig::default(),
            aicons: AiconsConfig::default(),
            baseline: BaselineConfig::default(),
            profiles: Vec::new(),
            planted_winner: None,
            genesis_trace: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.nodes < 2 {
            return bad(format!("at least 2 nodes are required, got {}", self.nodes));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return bad(format!("budget must be >= 0, got {}", self.budget));
        }
        if self.block_tx_capacity == 0 {
            return bad("block_tx_capacity must be >= 1".into());
        }
        if !self.profiles.is_empty() && self.profiles.len() != self.nodes {
            return bad(format!(
                "{} profiles given for {} nodes",
                self.profiles.len(),
                self.nodes
            ));
        }
        if let Some(p) = self.planted_winner {
            if p.index() >= self.nodes {
                return bad(format!("planted winner {p} is not a node"));
            }
        }
        let b = &self.baseline;
        if self.engine == EngineKind::Pod && !(1..=self.nodes).contains(&b.pod_validators) {
            return bad(format!("pod_validators must be in [1, {}]", self.nodes));
        }
        if self.engine == EngineKind::Pofl
            && (b.pofl_group_size == 0 || self.nodes / b.pofl_group_size < 2)
        {
            return bad(format!(
                "PoFL needs at least 2 groups of {} nodes",
                b.pofl_group_size
            ));
        }
        if !b.initial_stake.is_empty() {
            if b.initial_stake.len() != self.nodes {
                return bad(format!(
                    "{} stakes given for {} nodes",
                    b.initial_stake.len(),
                    self.nodes
                ));
            }
            if b.initial_stake
                .iter()
                .any(|s| !(s.is_finite() && *s >= 0.0))
                || b.initial_stake.iter().sum::<f64>() <= 0.0
            {
                return bad("stakes must be >= 0 with a positive total".into());
            }
        }
        if !(b.pod_jitter.is_finite() && b.pod_jitter >= 0.0) {
            return bad("pod_jitter must be >= 0".into());
        }
        self.model.validate()?;
        self.shapley.validate()?;
        self.timing.validate()?;
        self.aicons.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_names_round_trip() {
        for e in EngineKind::ALL {
            assert_eq!(e.name().parse::<EngineKind>().unwrap(), e);
        }
        assert!("unknown".parse::<EngineKind>().is_err());
    }

    #[test]
    fn validation() {
        SimConfig::default().validate().unwrap();
        assert!(SimConfig {
            nodes: 1,
            ..SimConfig::default()
        }
        .validate()
        .is_err());
        let pofl = SimConfig {
            engine: EngineKind::Pofl,
            nodes: 7,
            ..SimConfig::default()
        };
        assert!(pofl.validate().is_err());
        assert!(SimConfig { nodes: 8, ..pofl }.validate().is_ok());
        let mut c = SimConfig::default();
        c.aicons.genesis_rounds = 5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let c = SimConfig {
            nodes: 4,
            engine: EngineKind::Pod,
            ..SimConfig::default()
        };
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<SimConfig>(&s).unwrap(), c);
        let partial: SimConfig = serde_json::from_str(r#"{"nodes": 3, "engine": "pow"}"#).unwrap();
        assert_eq!(partial.rounds, 50);
        assert_eq!(partial.engine, EngineKind::Pow);
    }
}
