use std::io::Write;

use evoscape_core::{Rating, RatingMap, Session};
use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: u32,
    pub mean_good_count: f64,
    pub mean_bad_count: f64,
    /// Number of rating maps averaged at this iteration.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingCurves {
    pub points: Vec<CurvePoint>,
}

/// Every rating map a session recorded, tagged with its iteration.
///
/// The parents picked while generation `t` was the newest carry iteration `t`;
/// the final ratings of the favourite carry the index of the last generation.
fn rating_events(session: &Session) -> Vec<(u32, &RatingMap)> {
    let mut events = Vec::new();
    for generation in &session.generations {
        for parent in generation.selection.iter().flatten() {
            events.push((generation.index - 1, &parent.ratings));
        }
    }
    if let (Some(ratings), Some(last)) = (&session.final_ratings, session.latest()) {
        events.push((last.index, ratings));
    }
    events
}

/// Average Good and Bad counts per rated individual at each iteration, across
/// all sessions. There is one point per iteration from 0 to the highest
/// generation index present; iterations with no ratings read zero.
pub fn rating_curves(sessions: &[Session]) -> RatingCurves {
    let len = sessions.iter().map(|s| s.generations.len()).max().unwrap_or(0);
    let mut sums = vec![(0usize, 0usize, 0usize); len];
    for session in sessions {
        for (iteration, ratings) in rating_events(session) {
            let slot = &mut sums[iteration as usize];
            slot.0 += ratings.count(Rating::Good);
            slot.1 += ratings.count(Rating::Bad);
            slot.2 += 1;
        }
    }
    let points = sums
        .into_iter()
        .enumerate()
        .map(|(iteration, (good, bad, samples))| {
            let mean = |total: usize| if samples == 0 { 0.0 } else { total as f64 / samples as f64 };
            CurvePoint { iteration: iteration as u32, mean_good_count: mean(good), mean_bad_count: mean(bad), samples }
        })
        .collect();
    RatingCurves { points }
}

impl RatingCurves {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut writer = csv::Writer::from_writer(out);
        for point in &self.points {
            writer.serialize(point)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:>9}  {:>9}  {:>9}  {:>7}\n", "iteration", "mean_good", "mean_bad", "samples");
        for p in &self.points {
            out.push_str(&format!(
                "{:>9}  {:>9.3}  {:>9.3}  {:>7}\n",
                p.iteration, p.mean_good_count, p.mean_bad_count, p.samples
            ));
        }
        out
    }
}
