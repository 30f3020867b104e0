//! Shared value types: monitoring samples, node profiles and the simulated ledger.

mod ledger;
mod profile;
mod sample;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ledger::{
    digest, verify_chain_jsonl, BlockRecord, Chain, Digest, LedgerBlock, FNV_OFFSET_BASIS,
};
pub use profile::{BetaParams, LogNormalParams, NodeProfile, TDP_CHOICES_W};
pub use sample::{
    label_group, label_records, validate_sample, Field, LabeledRecord, MonitoringSample, Violation,
    FEATURE_COUNT,
};

/// Index of a node in the participating set.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index fits in u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
