use rand::Rng;

use crate::genome::{AttributeKey, AttributeValue, Individual, Rating};

/// Extra copies of a parent's value added when that parent's value is rated Good.
pub const GOOD_BONUS_COPIES: usize = 2;

/// Weighted candidates for one child gene.
///
/// Layout: parent 1's value (1 or 3 copies), parent 2's value (1 or 3
/// copies), then the blend. Each entry is equally likely to be drawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceList {
    pub key: AttributeKey,
    pub entries: Vec<AttributeValue>,
}

impl ChoiceList {
    pub fn build(key: AttributeKey, first: &Individual, second: &Individual, blend: AttributeValue) -> Self {
        let mut entries = Vec::with_capacity(7);
        for parent in [first, second] {
            let copies = match parent.ratings.get(key) {
                Rating::Good => 1 + GOOD_BONUS_COPIES,
                _ => 1,
            };
            entries.extend(std::iter::repeat_n(parent.attributes.get(key).clone(), copies));
        }
        entries.push(blend);
        ChoiceList { key, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Uniform draw over the entries.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> &AttributeValue {
        &self.entries[rng.random_range(0..self.entries.len())]
    }
}
