//! Multi-agent observation fusion by message passing of set latents.
//!
//! Each agent encodes what it sees. In every round it decodes its own latent
//! and its neighbours', merges the decoded sets with a learned duplicate
//! filter and encodes the merged set again. Message size stays `d_z`
//! whatever the number of objects.

mod filter;
mod rollout;
mod train;
mod world;

pub use filter::{filter_union, pair_same_prob, FilterParams, DUPLICATE_THRESHOLD};
pub use rollout::{
    coverage, evaluate_fusion, fusion_layer, fusion_rollout, provenance_pairs, AgentBelief, FusionEvalReport,
    FusionEvalRow, FusionSystem, Rollout, COVERAGE_TOLERANCE,
};
pub use train::{balanced_pairs, FusionStepStats, FusionTrainConfig, FusionTrainer};
pub use world::{generate_world, World, WorldConfig, APPEARANCE_DIMS, OBJECT_DIM, POS_DIMS};

use crate::scalar::Scalar;
use crate::set::ElementSet;

/// A set whose elements carry the id of the object they came from.
///
/// Ids are bookkeeping for training and evaluation only; the networks never
/// see them. `None` marks an element with no known source.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSet<T> {
    pub set: ElementSet<T>,
    pub ids: Vec<Option<usize>>,
}

impl<T: Scalar> TaggedSet<T> {
    pub fn empty(dim: usize) -> Self {
        Self {
            set: ElementSet::empty(dim),
            ids: Vec::new(),
        }
    }

    /// Wraps a set whose provenance is unknown.
    pub fn untagged(set: ElementSet<T>) -> Self {
        let ids = vec![None; set.len()];
        Self { set, ids }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }
}
