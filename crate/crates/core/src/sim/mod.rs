//! Multi-round consensus simulation on simulated time: the AI-driven engine
//! plus PoW, PoS, PoD and PoFL baselines over one shared node population.

mod aicons;
mod baselines;
mod config;
mod engine;
mod network;
mod outcome;
mod run;

pub use aicons::AiconsEngine;
pub use baselines::{PodEngine, PoflEngine, PosEngine, PowEngine};
pub use config::{AiconsConfig, BaselineConfig, EngineKind, SimConfig, TimingConfig};
pub use engine::{ConsensusEngine, SimState};
pub use network::{NetworkModel, MIN_BANDWIDTH_KBPS};
pub use outcome::{throughput, write_outcomes_csv, RoundOutcome};
pub use run::{make_engine, run_from_state, run_simulation, SimRun};
