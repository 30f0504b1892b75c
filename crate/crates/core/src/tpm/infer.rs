use serde::{Deserialize, Serialize};

use super::heads::{predict_category, predict_location, TimeDistribution};
use super::model::TpmModel;
use super::TpmError;
use crate::data::EventSequence;
use crate::metrics::TransitionOutcome;

/// Prediction for event `j + 1` made from the history up to event `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sequence_id: String,
    /// Index `j` of the conditioning event.
    pub event_index: usize,
    pub current_time: f64,
    pub predicted_time: f64,
    pub truth_time: f64,
    pub predicted_category: usize,
    pub category_distribution: Vec<f64>,
    pub truth_category: usize,
    pub current_location: (f64, f64),
    pub predicted_location: (f64, f64),
    pub truth_location: (f64, f64),
    /// Waiting-time law behind `predicted_time`, when the model has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_distribution: Option<TimeDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_density_samples: Option<Vec<(f64, f64)>>,
}

impl PredictionRecord {
    pub fn outcome(&self) -> TransitionOutcome {
        TransitionOutcome {
            current_time: self.current_time,
            truth_time: self.truth_time,
            predicted_time: self.predicted_time,
            category_scores: self.category_distribution.clone(),
            truth_category: self.truth_category,
            predicted_location: self.predicted_location,
            truth_location: self.truth_location,
        }
    }
}

/// Evenly spaced grid over `[t_j, t_j + span_factor·(t̂ − t_j)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub points: usize,
    pub span_factor: f64,
}

impl Default for DensityGrid {
    fn default() -> Self {
        Self {
            points: 501,
            span_factor: 5.0,
        }
    }
}

impl DensityGrid {
    pub fn sample(&self, law: &TimeDistribution, t_j: f64, predicted: f64) -> Vec<(f64, f64)> {
        let n = self.points.max(2);
        let span = self.span_factor * (predicted - t_j);
        (0..n)
            .map(|i| {
                let dt = span * i as f64 / (n - 1) as f64;
                (t_j + dt, law.density(dt))
            })
            .collect()
    }
}

/// Trapezoid rule over `(t, f)` samples.
pub fn trapezoid(samples: &[(f64, f64)]) -> f64 {
    samples.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

impl TpmModel {
    /// One record per transition, each conditioned on the ground-truth
    /// history up to event `j` (frames through event `j`'s frame).
    pub fn evaluate_teacher_forced(
        &self,
        seq: &EventSequence,
        density: Option<DensityGrid>,
    ) -> Result<Vec<PredictionRecord>, TpmError> {
        let m = seq.events.len();
        if m < 2 {
            return Ok(Vec::new());
        }
        let hs = self.hidden_states(seq, m - 1)?;
        let (time, cat, space) = (self.time_head(), self.category_head(), self.space_head());
        Ok(hs
            .iter()
            .enumerate()
            .map(|(j, h)| {
                let (cur, next) = (seq.events[j], seq.events[j + 1]);
                let law = time.distribution(h);
                let predicted_time = cur.t + law.expected_interval();
                let dist = cat.distribution(h);
                PredictionRecord {
                    sequence_id: seq.id.clone(),
                    event_index: j,
                    current_time: cur.t,
                    predicted_time,
                    truth_time: next.t,
                    predicted_category: predict_category(&dist),
                    category_distribution: dist,
                    truth_category: next.category,
                    current_location: cur.location(),
                    predicted_location: predict_location(space.mean(h), cur.location()),
                    truth_location: next.location(),
                    time_distribution: Some(law),
                    time_density_samples: density.map(|g| g.sample(&law, cur.t, predicted_time)),
                }
            })
            .collect())
    }
}
