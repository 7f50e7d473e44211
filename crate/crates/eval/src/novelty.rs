use evoscape_core::{Gateway, Generation, ImageRef, ProviderError, Session};
use serde::{Deserialize, Serialize};

use crate::EvalError;

/// Anything that rates how different two images look, on a 0 to 10 scale.
pub trait DifferenceScorer {
    fn difference(&self, a: &ImageRef, b: &ImageRef) -> Result<f64, ProviderError>;
}

impl DifferenceScorer for Gateway {
    fn difference(&self, a: &ImageRef, b: &ImageRef) -> Result<f64, ProviderError> {
        self.score_image_difference(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: String,
    pub b: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltyReport {
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    pub n_pairs: usize,
    pub scores: Vec<PairScore>,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, variance.sqrt())
}

/// Scores every pair in `set_a × set_b` once.
pub fn pairwise_novelty(
    set_a: &[ImageRef],
    set_b: &[ImageRef],
    scorer: &dyn DifferenceScorer,
) -> Result<NoveltyReport, EvalError> {
    if set_a.is_empty() {
        return Err(EvalError::EmptySet("first"));
    }
    if set_b.is_empty() {
        return Err(EvalError::EmptySet("second"));
    }
    let mut scores = Vec::with_capacity(set_a.len() * set_b.len());
    for a in set_a {
        for b in set_b {
            let score = scorer.difference(a, b)?;
            scores.push(PairScore { a: a.identity().to_string(), b: b.identity().to_string(), score });
        }
    }
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let (mean, sd) = mean_and_sd(&values);
    Ok(NoveltyReport { mean, sd, n_pairs: scores.len(), scores })
}

/// `(last - first) / first × 100`. Equal means give exactly 0; a zero
/// `first_mean` with a larger `last_mean` gives infinity.
pub fn percent_change(first_mean: f64, last_mean: f64) -> f64 {
    if first_mean == last_mean {
        return 0.0;
    }
    (last_mean - first_mean) / first_mean * 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationGain {
    pub first_mean: f64,
    pub last_mean: f64,
    pub percent_change: f64,
    pub first: NoveltyReport,
    pub last: NoveltyReport,
}

fn images(generation: &Generation) -> Vec<ImageRef> {
    generation.members.iter().map(|m| m.image.clone()).collect()
}

/// How much further the last generation strays than the first did.
///
/// `first_mean` is the novelty of the first generation against `reference`
/// (for instance plain text-to-image renders of the same prompt); without a
/// reference the first generation is compared with itself. `last_mean` is the
/// novelty of the last generation against the first.
pub fn exploration_gain(
    first: &Generation,
    last: &Generation,
    reference: Option<&[ImageRef]>,
    scorer: &dyn DifferenceScorer,
) -> Result<ExplorationGain, EvalError> {
    let first_images = images(first);
    let reference = reference.map(<[ImageRef]>::to_vec).unwrap_or_else(|| first_images.clone());
    let first_report = pairwise_novelty(&reference, &first_images, scorer)?;
    let last_report = pairwise_novelty(&first_images, &images(last), scorer)?;
    Ok(ExplorationGain {
        first_mean: first_report.mean,
        last_mean: last_report.mean,
        percent_change: percent_change(first_report.mean, last_report.mean),
        first: first_report,
        last: last_report,
    })
}

/// [`exploration_gain`] between a session's first and last generations.
pub fn session_gain(
    session: &Session,
    reference: Option<&[ImageRef]>,
    scorer: &dyn DifferenceScorer,
) -> Result<ExplorationGain, EvalError> {
    match session.generations.as_slice() {
        [first, .., last] => exploration_gain(first, last, reference, scorer),
        other => Err(EvalError::TooFewGenerations(other.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Table(HashMap<(String, String), f64>);

    impl DifferenceScorer for Table {
        fn difference(&self, a: &ImageRef, b: &ImageRef) -> Result<f64, ProviderError> {
            let (a, b) = (a.identity().to_string(), b.identity().to_string());
            Ok(self.0.get(&(a.clone(), b.clone())).or_else(|| self.0.get(&(b, a))).copied().unwrap_or(0.0))
        }
    }

    fn img(name: &str) -> ImageRef {
        ImageRef { uri: format!("images/{name}.png"), digest: Some(name.into()) }
    }

    #[test]
    fn constant_scores_have_zero_spread() {
        let a = [img("a0"), img("a1")];
        let b = [img("b0"), img("b1"), img("b2")];
        let table = Table(a.iter().flat_map(|x| b.iter().map(move |y| ((x.identity().into(), y.identity().into()), 8.0))).collect());
        let r = pairwise_novelty(&a, &b, &table).unwrap();
        assert_eq!((r.mean, r.sd, r.n_pairs), (8.0, 0.0, 6));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let table = Table(HashMap::new());
        assert!(matches!(pairwise_novelty(&[img("a")], &[], &table), Err(EvalError::EmptySet("second"))));
        assert!(matches!(pairwise_novelty(&[], &[img("a")], &table), Err(EvalError::EmptySet("first"))));
    }

    #[test]
    fn percent_change_basics() {
        assert_eq!(percent_change(4.0, 5.0), 25.0);
        assert_eq!(percent_change(5.0, 4.0), -20.0);
        assert_eq!(percent_change(0.0, 0.0), 0.0);
        assert!(percent_change(0.0, 1.0).is_infinite());
    }
}
