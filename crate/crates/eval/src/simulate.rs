use std::path::Path;

use evoscape_core::engine::{self, SimilarityMemo, StepRequest};
use evoscape_core::{
    AttributeKey, Gateway, ImageRef, IndividualId, InitialPrompt, Rating, RatingMap, Session, SessionId, SessionStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinishChoice {
    pub favourite_id: IndividualId,
    #[serde(default)]
    pub ratings: RatingMap,
}

/// A recorded sequence of user decisions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub steps: Vec<StepRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish: Option<FinishChoice>,
}

impl Transcript {
    /// The decisions that produced `session`, ready to be replayed.
    pub fn from_session(session: &Session) -> Self {
        let steps = session
            .generations
            .iter()
            .filter_map(|g| g.selection.as_ref())
            .map(|parents| StepRequest {
                parent_ids: parents.iter().map(|p| p.id.clone()).collect(),
                ratings: parents
                    .iter()
                    .filter(|p| !p.ratings.is_all_unrated())
                    .map(|p| (p.id.clone(), p.ratings.clone()))
                    .collect(),
            })
            .collect();
        let finish = session
            .favourite
            .clone()
            .map(|favourite_id| FinishChoice { favourite_id, ratings: session.final_ratings.clone().unwrap_or_default() });
        Transcript { steps, finish }
    }
}

/// Stands in for the person choosing parents.
#[derive(Debug, Clone, PartialEq)]
pub enum SelectorPolicy {
    /// Two distinct parents drawn from the whole history; each parent key is
    /// rated Good or Bad with probability 1/5 each.
    Random { seed: u64 },
    /// Always breeds the first two members of the newest generation and rates
    /// `key` Good on both.
    GreedyFavorKey { key: AttributeKey },
    /// Replays recorded decisions.
    Scripted(Transcript),
}

/// Stream reserved for the random policy's finishing choice.
const FINISH_STREAM: u64 = u64::MAX;

fn random_ratings<R: Rng>(rng: &mut R) -> RatingMap {
    AttributeKey::ALL.into_iter().fold(RatingMap::default(), |map, key| {
        let rating = match rng.random_range(0..5) {
            0 => Rating::Good,
            1 => Rating::Bad,
            _ => Rating::Unrated,
        };
        map.with(key, rating)
    })
}

impl SelectorPolicy {
    /// Parents and ratings for the step taken while `session`'s newest
    /// generation is `iteration`.
    pub fn choose(&self, session: &Session, iteration: usize) -> Result<StepRequest, EvalError> {
        match self {
            SelectorPolicy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(iteration as u64);
                let all: Vec<&IndividualId> = session.individuals().map(|i| &i.id).collect();
                let first = rng.random_range(0..all.len());
                let mut second = rng.random_range(0..all.len() - 1);
                if second >= first {
                    second += 1;
                }
                let (a, b) = (all[first].clone(), all[second].clone());
                let (ra, rb) = (random_ratings(&mut rng), random_ratings(&mut rng));
                Ok(StepRequest::new(a.clone(), b.clone()).rate(a, ra).rate(b, rb))
            }
            SelectorPolicy::GreedyFavorKey { key } => {
                let latest = session.latest().ok_or_else(|| EvalError::Policy("session has no generations".into()))?;
                let (a, b) = (latest.members[0].id.clone(), latest.members[1].id.clone());
                let liked = RatingMap::default().with(*key, Rating::Good);
                Ok(StepRequest::new(a.clone(), b.clone()).rate(a, liked.clone()).rate(b, liked))
            }
            SelectorPolicy::Scripted(transcript) => transcript.steps.get(iteration).cloned().ok_or_else(|| {
                EvalError::Policy(format!("transcript has {} steps, step {} requested", transcript.steps.len(), iteration + 1))
            }),
        }
    }

    /// Favourite and final ratings, or `None` to leave the session open.
    pub fn finish(&self, session: &Session) -> Option<FinishChoice> {
        match self {
            SelectorPolicy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(FINISH_STREAM);
                let all: Vec<&IndividualId> = session.individuals().map(|i| &i.id).collect();
                let favourite_id = all[rng.random_range(0..all.len())].clone();
                Some(FinishChoice { favourite_id, ratings: random_ratings(&mut rng) })
            }
            SelectorPolicy::GreedyFavorKey { key } => session.latest().map(|latest| FinishChoice {
                favourite_id: latest.members[0].id.clone(),
                ratings: RatingMap::default().with(*key, Rating::Good),
            }),
            SelectorPolicy::Scripted(transcript) => transcript.finish.clone(),
        }
    }
}

/// Runs a whole session without a person: initialization, `iterations`
/// steps chosen by `policy`, then the policy's finishing choice if it makes one.
pub fn simulate_session(
    prompt: &InitialPrompt,
    iterations: usize,
    policy: &SelectorPolicy,
    gateway: &Gateway,
    seed: u64,
) -> Result<Session, EvalError> {
    let mut session = Session::new(SessionId::new(format!("sim-{seed:016x}")), prompt.clone(), seed);
    session.generations.push(engine::initialize_population(prompt, gateway, &mut |_| {})?);
    session.status = SessionStatus::AwaitingSelection;
    let mut memo = SimilarityMemo::default();
    for iteration in 0..iterations {
        let request = policy.choose(&session, iteration)?;
        engine::next_generation(&mut session, &request, gateway, &mut memo, &mut |_| {})?;
    }
    if let Some(choice) = policy.finish(&session) {
        engine::finish_session(&mut session, &choice.favourite_id, choice.ratings)?;
    }
    Ok(session)
}

/// Pretty JSON of the session, newline-terminated.
pub fn write_transcript(session: &Session, path: &Path) -> Result<(), EvalError> {
    let mut text = serde_json::to_string_pretty(session)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Images rendered from the bare prompt, as a plain text-to-image call would.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSet {
    pub prompt: String,
    pub images: Vec<ImageRef>,
    pub descriptions: Vec<String>,
}

pub fn baseline(prompt: &InitialPrompt, count: u32, gateway: &Gateway) -> Result<BaselineSet, EvalError> {
    let mut set = BaselineSet { prompt: prompt.to_string(), images: Vec::new(), descriptions: Vec::new() };
    for variant in 0..count {
        let generated = gateway.generate_baseline_image(prompt, variant)?;
        set.images.push(generated.image);
        set.descriptions.push(generated.description);
    }
    Ok(set)
}
