//! Time, space and category scores for next-event predictions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("ground-truth interval {0} is not positive")]
    NonPositiveInterval(f64),
    #[error("class {class} out of range for {n} classes")]
    ClassOutOfRange { class: usize, n: usize },
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Mean absolute difference.
pub fn mae(predicted: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predicted.len(), truth.len())?;
    Ok(predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / predicted.len() as f64)
}

/// Mean Euclidean distance between paired points.
pub fn space_mae(predicted: &[(f64, f64)], truth: &[(f64, f64)]) -> Result<f64, MetricsError> {
    check_lengths(predicted.len(), truth.len())?;
    let total: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p.0 - t.0).hypot(p.1 - t.1))
        .sum();
    Ok(total / predicted.len() as f64)
}

/// Deviation rates of one prediction, both normalized by the true
/// interval `truth − current`: `(|predicted − current|, |predicted − truth|)`.
/// The first is the literal printed form, the second measures the error.
pub fn deviation_rate(predicted: f64, current: f64, truth: f64) -> Result<(f64, f64), MetricsError> {
    let interval = truth - current;
    if !(interval > 0.0) {
        return Err(MetricsError::NonPositiveInterval(interval));
    }
    Ok(((predicted - current).abs() / interval, (predicted - truth).abs() / interval))
}

/// Average precision of one class: events ranked by that class's score
/// (ties keep input order), precision averaged over the ranks of the
/// positives. `None` when the class never occurs.
pub fn average_precision(scores: &[Vec<f64>], truths: &[usize], class: usize) -> Result<Option<f64>, MetricsError> {
    check_lengths(scores.len(), truths.len())?;
    if let Some(s) = scores.iter().find(|s| class >= s.len()) {
        return Err(MetricsError::ClassOutOfRange { class, n: s.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b][class].total_cmp(&scores[a][class]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if truths[i] == class {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok((hits > 0).then(|| sum / hits as f64))
}

/// Per-class AP and their mean over the classes that occur at least once.
pub fn mean_average_precision(
    scores: &[Vec<f64>],
    truths: &[usize],
    n_classes: usize,
) -> Result<(Option<f64>, Vec<Option<f64>>), MetricsError> {
    if let Some(&t) = truths.iter().find(|&&t| t >= n_classes) {
        return Err(MetricsError::ClassOutOfRange { class: t, n: n_classes });
    }
    let per_class = (0..n_classes)
        .map(|c| average_precision(scores, truths, c))
        .collect::<Result<Vec<_>, _>>()?;
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let map = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    Ok((map, per_class))
}

/// Outcome of predicting one transition `j → j+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub current_time: f64,
    pub truth_time: f64,
    pub predicted_time: f64,
    pub category_scores: Vec<f64>,
    pub truth_category: usize,
    pub predicted_location: (f64, f64),
    pub truth_location: (f64, f64),
}

/// Aggregate scores over a set of transitions. Times are reported in
/// milliseconds (inputs in seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub n_transitions: usize,
    pub time_mae_ms: f64,
    pub space_mae: f64,
    pub mdr_as_written: f64,
    /// Headline timing score.
    pub mdr_error: f64,
    pub per_class_ap: BTreeMap<String, f64>,
    /// Classes with no occurrence, left out of `map`.
    pub excluded_classes: Vec<String>,
    pub map: f64,
}

const CSV_COLUMNS: &str = "model,n_transitions,time_mae_ms,space_mae,mdr_as_written,mdr_error,map";

impl EvalReport {
    pub fn from_outcomes(model: &str, outcomes: &[TransitionOutcome], classes: &[String]) -> Result<Self, MetricsError> {
        if outcomes.is_empty() {
            return Err(MetricsError::Empty);
        }
        let pred_t: Vec<f64> = outcomes.iter().map(|o| o.predicted_time).collect();
        let true_t: Vec<f64> = outcomes.iter().map(|o| o.truth_time).collect();
        let pred_l: Vec<(f64, f64)> = outcomes.iter().map(|o| o.predicted_location).collect();
        let true_l: Vec<(f64, f64)> = outcomes.iter().map(|o| o.truth_location).collect();
        let mut dr = (0.0, 0.0);
        for o in outcomes {
            let (a, e) = deviation_rate(o.predicted_time, o.current_time, o.truth_time)?;
            dr.0 += a;
            dr.1 += e;
        }
        let n = outcomes.len() as f64;
        let scores: Vec<Vec<f64>> = outcomes.iter().map(|o| o.category_scores.clone()).collect();
        let truths: Vec<usize> = outcomes.iter().map(|o| o.truth_category).collect();
        let (map, per) = mean_average_precision(&scores, &truths, classes.len())?;
        let mut per_class_ap = BTreeMap::new();
        let mut excluded_classes = Vec::new();
        for (name, ap) in classes.iter().zip(per) {
            match ap {
                Some(v) => {
                    per_class_ap.insert(name.clone(), v);
                }
                None => excluded_classes.push(name.clone()),
            }
        }
        Ok(Self {
            model: model.to_string(),
            n_transitions: outcomes.len(),
            time_mae_ms: 1000.0 * mae(&pred_t, &true_t)?,
            space_mae: space_mae(&pred_l, &true_l)?,
            mdr_as_written: dr.0 / n,
            mdr_error: dr.1 / n,
            per_class_ap,
            excluded_classes,
            map: map.unwrap_or(0.0),
        })
    }

    /// Header line followed by the summary row (per-class APs appended as
    /// `ap_<class>` columns).
    pub fn to_csv(&self) -> String {
        let mut header = CSV_COLUMNS.to_string();
        let mut row = format!(
            "{},{},{},{},{},{},{}",
            self.model,
            self.n_transitions,
            self.time_mae_ms,
            self.space_mae,
            self.mdr_as_written,
            self.mdr_error,
            self.map
        );
        for (c, ap) in &self.per_class_ap {
            header.push_str(&format!(",ap_{c}"));
            row.push_str(&format!(",{ap}"));
        }
        format!("{header}\n{row}\n")
    }
}
