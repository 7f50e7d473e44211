use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::choice::ChoiceList;
use super::mutation::{mutate, select_attributes_to_mutate, GatewayJudge, SimilarityMemo};
use super::{step_rng, EngineError, StepPhase};
use crate::genome::{
    record_parent_ratings, AttributeKey, AttributeMap, Generation, Individual, IndividualId, InitialPrompt, RatedParent,
    RatingMap, Session, SessionStatus, POPULATION_SIZE,
};
use crate::provider::{Gateway, ProviderError};

/// A parent choice plus optional per-parent ratings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRequest {
    pub parent_ids: Vec<IndividualId>,
    #[serde(default)]
    pub ratings: BTreeMap<IndividualId, RatingMap>,
}

impl StepRequest {
    pub fn new(first: impl Into<IndividualId>, second: impl Into<IndividualId>) -> Self {
        StepRequest { parent_ids: vec![first.into(), second.into()], ratings: BTreeMap::new() }
    }

    pub fn rate(mut self, id: impl Into<IndividualId>, ratings: RatingMap) -> Self {
        self.ratings.insert(id.into(), ratings);
        self
    }
}

/// Checks parent arity, existence and that ratings only target the parents.
/// Does not look at the session status.
pub fn validate_step(session: &Session, request: &StepRequest) -> Result<[IndividualId; 2], EngineError> {
    let [first, second] = request.parent_ids.as_slice() else {
        return Err(EngineError::NotTwoParents(request.parent_ids.len()));
    };
    if first == second {
        return Err(EngineError::DuplicateParent(first.clone()));
    }
    for id in [first, second] {
        if session.find(id).is_none() {
            return Err(EngineError::UnknownParent(id.clone()));
        }
    }
    if let Some(stray) = request.ratings.keys().find(|id| *id != first && *id != second) {
        return Err(EngineError::RatingForNonParent(stray.clone()));
    }
    Ok([first.clone(), second.clone()])
}

/// Renders every draft, up to four requests in flight at once; the gateway's
/// rate limiter decides when each may start.
fn render(
    prompt: &InitialPrompt,
    generation_index: u32,
    drafts: Vec<(IndividualId, AttributeMap, Vec<IndividualId>)>,
    gateway: &Gateway,
) -> Result<Vec<Individual>, EngineError> {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = drafts
            .iter()
            .map(|(_, attributes, _)| scope.spawn(move || gateway.generate_image(prompt, attributes)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("image worker panicked")).collect()
    });
    drafts
        .into_iter()
        .zip(results)
        .map(|((id, attributes, parent_ids), generated)| {
            let generated = generated?;
            Ok(Individual {
                id,
                initial_prompt: prompt.clone(),
                attributes,
                image: generated.image,
                description: generated.description,
                generation_index,
                parent_ids,
                ratings: RatingMap::default(),
            })
        })
        .collect()
}

/// Builds generation 0: four attribute maps from the provider, then one image each.
pub fn initialize_population(
    prompt: &InitialPrompt,
    gateway: &Gateway,
    on_phase: &mut dyn FnMut(StepPhase),
) -> Result<Generation, EngineError> {
    on_phase(StepPhase::GeneratingAttributes);
    let maps = gateway.generate_initial_attributes(prompt)?;
    if maps.len() != POPULATION_SIZE {
        return Err(ProviderError::MalformedAttributes(format!("{} initial individuals", maps.len())).into());
    }
    on_phase(StepPhase::GeneratingImages);
    let drafts = maps
        .into_iter()
        .enumerate()
        .map(|(slot, attrs)| (IndividualId::positional(0, slot), attrs, Vec::new()))
        .collect();
    let members = render(prompt, 0, drafts, gateway)?;
    Ok(Generation { index: 0, members, selection: None })
}

/// Four draft children from two parents.
///
/// One blend per key is requested (in key order) and shared by all four
/// children's choice lists; each child gene is then an independent draw.
pub fn crossover<R: Rng + ?Sized>(
    first: &Individual,
    second: &Individual,
    gateway: &Gateway,
    rng: &mut R,
) -> Result<Vec<AttributeMap>, EngineError> {
    if first.id == second.id {
        return Err(EngineError::DuplicateParent(first.id.clone()));
    }
    let mut lists = BTreeMap::new();
    for key in AttributeKey::ALL {
        let blend = gateway.blend_attribute(key, first.attributes.get(key), second.attributes.get(key))?;
        lists.insert(key, ChoiceList::build(key, first, second, blend));
    }
    Ok((0..POPULATION_SIZE)
        .map(|_| AttributeMap::from_fn(|key| lists[&key].draw(rng).clone()))
        .collect())
}

/// Runs one full generation step on `session`.
///
/// Ratings are merged into the parents and Bad values join the tabu list;
/// four children are bred, planned, mutated and rendered; the new generation
/// is appended. The session is only modified when the whole step succeeds.
pub fn next_generation(
    session: &mut Session,
    request: &StepRequest,
    gateway: &Gateway,
    memo: &mut SimilarityMemo,
    on_phase: &mut dyn FnMut(StepPhase),
) -> Result<(), EngineError> {
    if session.status != SessionStatus::AwaitingSelection {
        return Err(EngineError::WrongState(session.status));
    }
    let [first_id, second_id] = validate_step(session, request)?;
    on_phase(StepPhase::GeneratingAttributes);

    let mut tabu = session.tabu.clone();
    let mut parents = [first_id, second_id].map(|id| session.find(&id).expect("validated parent").clone());
    for parent in parents.iter_mut() {
        if let Some(ratings) = request.ratings.get(&parent.id) {
            record_parent_ratings(parent, ratings, &mut tabu);
        }
    }
    let [first, second] = &parents;

    let index = session.next_index();
    let mut rng = step_rng(session.rng_seed, index);
    let children = crossover(first, second, gateway, &mut rng)?;

    let mut judge = GatewayJudge { gateway, memo };
    let mut plans = Vec::with_capacity(children.len());
    for (slot, child) in children.iter().enumerate() {
        let id = IndividualId::positional(index, slot);
        plans.push(select_attributes_to_mutate(id, child, first, second, &tabu, &mut judge, &mut rng)?);
    }
    let mut drafts = Vec::with_capacity(children.len());
    for (child, plan) in children.iter().zip(&plans) {
        let attrs = mutate(&session.prompt, child, plan, &tabu, gateway)?;
        drafts.push((plan.child_id.clone(), attrs, vec![first.id.clone(), second.id.clone()]));
    }

    on_phase(StepPhase::GeneratingImages);
    let members = render(&session.prompt, index, drafts, gateway)?;

    let selection = parents
        .iter()
        .map(|p| RatedParent { id: p.id.clone(), ratings: request.ratings.get(&p.id).cloned().unwrap_or_default() })
        .collect();
    for parent in parents {
        let stored = session.find_mut(&parent.id).expect("validated parent");
        stored.ratings = parent.ratings;
    }
    session.tabu = tabu;
    session.generations.push(Generation { index, members, selection: Some(selection) });
    Ok(())
}

/// Marks the session finished with a favourite from any generation.
pub fn finish_session(session: &mut Session, favourite: &IndividualId, ratings: RatingMap) -> Result<(), EngineError> {
    if session.status != SessionStatus::AwaitingSelection {
        return Err(EngineError::WrongState(session.status));
    }
    if session.find(favourite).is_none() {
        return Err(EngineError::UnknownFavourite(favourite.clone()));
    }
    session.favourite = Some(favourite.clone());
    session.final_ratings = Some(ratings);
    session.status = SessionStatus::Finished;
    Ok(())
}
