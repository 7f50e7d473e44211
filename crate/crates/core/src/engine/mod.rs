//! Initialization, crossover, mutation and the generation step.
//!
//! Given a seed and deterministic provider answers the engine is fully
//! reproducible. Randomness for producing generation `n` comes from a ChaCha8
//! stream `n` under the session seed and is consumed in a fixed order:
//! choice-list draws (child by child, key order), then mutation coin flips
//! (child by child, key order). Blends are requested in key order and consume
//! no randomness.

mod choice;
mod mutation;
mod population;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{GenomeError, IndividualId, SessionStatus};
use crate::provider::ProviderError;

pub use choice::{ChoiceList, GOOD_BONUS_COPIES};
pub use mutation::{
    mutate, select_attributes_to_mutate, GatewayJudge, MutationPlan, MutationReason, SimilarityJudge, SimilarityMemo,
    UNRATED_MUTATION_PROBABILITY,
};
pub use population::{
    crossover, finish_session, initialize_population, next_generation, validate_step, StepRequest,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error("exactly two distinct parents are required (got {0})")]
    NotTwoParents(usize),
    #[error("the same individual {0} was picked as both parents")]
    DuplicateParent(IndividualId),
    #[error("unknown parent {0}")]
    UnknownParent(IndividualId),
    #[error("ratings given for {0}, which is not a selected parent")]
    RatingForNonParent(IndividualId),
    #[error("unknown favourite {0}")]
    UnknownFavourite(IndividualId),
    #[error("session is {0:?}")]
    WrongState(SessionStatus),
}

/// Progress notifications for long-running steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepPhase {
    GeneratingAttributes,
    GeneratingImages,
}

pub type StepRng = ChaCha8Rng;

/// Random stream for producing generation `generation_index`.
pub fn step_rng(seed: u64, generation_index: u32) -> StepRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation_index as u64);
    rng
}
