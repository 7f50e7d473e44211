//! Interactive evolution of text-to-image prompts.
//!
//! A session starts from a short concept. Each individual carries six textual
//! attribute genes; the user picks two parents per step and may rate their
//! attributes Good or Bad. Crossover draws each child gene from a weighted
//! choice list, mutation replaces Bad-matching (and, at random, unrated)
//! genes with provider-suggested values that avoid everything the user has
//! rated Bad so far.

pub mod engine;
pub mod genome;
pub mod provider;

pub use engine::{EngineError, StepPhase, StepRequest};
pub use genome::{
    AttributeKey, AttributeMap, AttributeValue, Generation, ImageRef, Individual, IndividualId, InitialPrompt, Rating,
    RatingMap, Session, SessionId, SessionStatus, TabuList,
};
pub use provider::{Gateway, ProviderError};
