//! Desk-scale experiment tooling: pairwise image novelty, first-versus-last
//! exploration gain, rating curves and fully scripted headless sessions.

pub mod curves;
pub mod novelty;
pub mod simulate;

use evoscape_core::{EngineError, ProviderError};
use thiserror::Error;

pub use curves::{rating_curves, CurvePoint, RatingCurves};
pub use novelty::{
    exploration_gain, pairwise_novelty, percent_change, session_gain, DifferenceScorer, ExplorationGain, NoveltyReport,
    PairScore,
};
pub use simulate::{baseline, simulate_session, write_transcript, BaselineSet, FinishChoice, SelectorPolicy, Transcript};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} image set is empty")]
    EmptySet(&'static str),
    #[error("session has {0} generation(s); at least 2 are needed")]
    TooFewGenerations(usize),
    #[error("policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
