use std::io::Write;

use super::aicons::AiconsEngine;
use super::baselines::{PodEngine, PoflEngine, PosEngine, PowEngine};
use super::config::{EngineKind, SimConfig};
use super::engine::{ConsensusEngine, SimState};
use super::outcome::RoundOutcome;
use crate::domain::{Chain, NodeProfile};
use crate::error::Result;
use crate::recommender::ModelParams;

pub fn make_engine(kind: EngineKind, state: &SimState) -> Box<dyn ConsensusEngine> {
    match kind {
        EngineKind::Aicons => Box::new(AiconsEngine),
        EngineKind::Pow => Box::new(PowEngine),
        EngineKind::Pos => Box::new(PosEngine),
        EngineKind::Pod => Box::new(PodEngine::new(state)),
        EngineKind::Pofl => Box::new(PoflEngine),
    }
}

/// Result of a full simulation run.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub config: SimConfig,
    pub profiles: Vec<NodeProfile>,
    pub outcomes: Vec<RoundOutcome>,
    pub chain: Chain,
    pub final_model: ModelParams,
}

impl SimRun {
    /// Per-round contributions as `round,node_id,contribution`.
    pub fn write_contributions_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["round", "node_id", "contribution"])?;
        for o in &self.outcomes {
            for (i, s) in o.contribution().iter().enumerate() {
                csv.write_record([o.round.to_string(), i.to_string(), s.to_string()])?;
            }
        }
        csv.flush()?;
        Ok(())
    }
}

/// Runs `cfg.rounds` rounds of `cfg.engine` and re-validates the chain.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimRun> {
    let mut state = SimState::new(cfg)?;
    run_from_state(&mut state, cfg.engine, cfg.rounds)
}

pub fn run_from_state(state: &mut SimState, kind: EngineKind, rounds: usize) -> Result<SimRun> {
    let mut engine = make_engine(kind, state);
    let mut outcomes = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let samples = state.draw_samples(round)?;
        let outcome = engine.run_round(state, round, &samples)?;
        state.commit(&outcome)?;
        log::debug!(
            "{kind} round {round}: winner {} elapsed {:.3}s",
            outcome.winner_id,
            outcome.elapsed_s
        );
        outcomes.push(outcome);
    }
    state.chain.validate()?;
    Ok(SimRun {
        config: state.cfg.clone(),
        profiles: state.profiles.clone(),
        outcomes,
        chain: state.chain.clone(),
        final_model: state.global.clone(),
    })
}
