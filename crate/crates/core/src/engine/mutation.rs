use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::genome::{normalize, AttributeKey, AttributeMap, AttributeValue, IndividualId, InitialPrompt, Individual, Rating, TabuList};
use crate::provider::{Gateway, ProviderError};

/// Probability that an attribute unrated on both parents is scheduled for mutation.
pub const UNRATED_MUTATION_PROBABILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MutationReason {
    /// The value equals a tabu entry, or equals or resembles a value one of
    /// the parents carries rated Bad.
    MatchedBad,
    UnratedCoinFlip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationPlan {
    pub child_id: IndividualId,
    pub reasons: BTreeMap<AttributeKey, MutationReason>,
}

impl MutationPlan {
    pub fn keys(&self) -> impl Iterator<Item = AttributeKey> + '_ {
        self.reasons.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.reasons.is_empty()
    }

    pub fn contains(&self, key: AttributeKey) -> bool {
        self.reasons.contains_key(&key)
    }
}

/// Decides whether a child value is the same concept as a Bad-rated value.
pub trait SimilarityJudge {
    fn similar(&mut self, key: AttributeKey, candidate: &AttributeValue, reference: &AttributeValue) -> Result<bool, ProviderError>;
}

/// Cached similarity verdicts for one session, keyed on normalized text.
#[derive(Debug, Clone, Default)]
pub struct SimilarityMemo {
    verdicts: HashMap<(AttributeKey, String, String), bool>,
}

impl SimilarityMemo {
    pub fn len(&self) -> usize {
        self.verdicts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verdicts.is_empty()
    }
}

/// Asks the gateway, at most once per (key, candidate, reference).
pub struct GatewayJudge<'a> {
    pub gateway: &'a Gateway,
    pub memo: &'a mut SimilarityMemo,
}

impl SimilarityJudge for GatewayJudge<'_> {
    fn similar(&mut self, key: AttributeKey, candidate: &AttributeValue, reference: &AttributeValue) -> Result<bool, ProviderError> {
        let memo_key = (key, normalize(candidate.as_str()), normalize(reference.as_str()));
        if let Some(verdict) = self.memo.verdicts.get(&memo_key) {
            return Ok(*verdict);
        }
        let verdict = self.gateway.judge_similarity(key, candidate, reference)?;
        self.memo.verdicts.insert(memo_key, verdict);
        Ok(verdict)
    }
}

/// Chooses which of a child's attributes to replace.
///
/// Per key, in key order:
/// 1. the value equals a tabu entry for the key, or
/// 2. equals or is judged similar to a parent's value rated Bad on the key
///    => `MatchedBad`;
/// 3. otherwise, if both parents leave the key Unrated, one coin flip with
///    probability 1/2 => `UnratedCoinFlip`.
///
/// Keys rated Good on either parent are never added by the coin flip.
pub fn select_attributes_to_mutate<R: Rng + ?Sized>(
    child_id: IndividualId,
    child: &AttributeMap,
    first: &Individual,
    second: &Individual,
    tabu: &TabuList,
    judge: &mut dyn SimilarityJudge,
    rng: &mut R,
) -> Result<MutationPlan, ProviderError> {
    let mut reasons = BTreeMap::new();
    for key in AttributeKey::ALL {
        let value = child.get(key);
        let mut matched = tabu.contains(key, value.as_str());
        if !matched {
            for parent in [first, second] {
                if parent.ratings.get(key) == Rating::Bad && judge.similar(key, value, parent.attributes.get(key))? {
                    matched = true;
                    break;
                }
            }
        }
        if matched {
            reasons.insert(key, MutationReason::MatchedBad);
        } else if first.ratings.get(key) == Rating::Unrated
            && second.ratings.get(key) == Rating::Unrated
            && rng.random_bool(UNRATED_MUTATION_PROBABILITY)
        {
            reasons.insert(key, MutationReason::UnratedCoinFlip);
        }
    }
    Ok(MutationPlan { child_id, reasons })
}

/// Replaces every planned key with a provider-generated value outside the
/// tabu list. Keys outside the plan are left untouched.
pub fn mutate(
    prompt: &InitialPrompt,
    child: &AttributeMap,
    plan: &MutationPlan,
    tabu: &TabuList,
    gateway: &Gateway,
) -> Result<AttributeMap, EngineError> {
    if plan.is_empty() {
        return Ok(child.clone());
    }
    let requests: BTreeMap<AttributeKey, Vec<AttributeValue>> =
        plan.keys().map(|k| (k, tabu.values(k).to_vec())).collect();
    let replacements = gateway.novel_alternatives(prompt, child, &requests)?;
    let mut out = child.clone();
    for key in plan.keys() {
        let value = replacements
            .get(&key)
            .ok_or_else(|| ProviderError::MalformedAttributes(format!("no alternative for {key}")))?;
        if tabu.contains(key, value.as_str()) {
            return Err(ProviderError::TabuViolation { key, value: value.to_string() }.into());
        }
        out.set(key, value.clone());
    }
    Ok(out)
}
