//! Three-axis Shapley contributions: exact enumeration, permutation
//! sampling, l1 normalization, collapsing and evaluator consensus.

mod exact;
mod game;
mod report;
mod sampled;

pub use exact::{shapley_exact, ShapleyMatrix, DEFAULT_EXACT_CAP};
pub use game::{
    bandwidth_score, energy_of_node, energy_score, utility, AccuracyInputs, CoalitionGame,
    CoalitionInputs, DimensionMask, UtilityVector, ENERGY_EPSILON_J,
};
pub use report::{
    collapse, consensus_average, normalize, shapley_auto, ConsensusOrder, ShapleyConfig,
    ShapleyReport,
};
pub use sampled::{shapley_sampled, DEFAULT_PERMUTATIONS, SAMPLED_PLAYER_CAP};
