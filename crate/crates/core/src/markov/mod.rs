//! k-order Markov chains over event categories with mean space shifts
//! and suffix backoff.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarkovError {
    #[error("order must be at least 1")]
    ZeroOrder,
    #[error("corpus has no events")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NextStats {
    pub count: u64,
    pub shift_sum: [f64; 2],
    /// Number of shifts accumulated (differs from `count` only at order 0).
    pub shift_count: u64,
}

impl NextStats {
    pub fn mean_shift(&self) -> (f64, f64) {
        if self.shift_count == 0 {
            (0.0, 0.0)
        } else {
            let n = self.shift_count as f64;
            (self.shift_sum[0] / n, self.shift_sum[1] / n)
        }
    }
}

type Level = BTreeMap<Vec<String>, BTreeMap<String, NextStats>>;

/// Transition counts for every context length `0..=order`. Level 0 counts
/// every event of the corpus and holds the mean shift into each category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TableFile", try_from = "TableFile")]
pub struct MarkovTable {
    order: usize,
    levels: Vec<Level>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableFile {
    format: String,
    order: usize,
    entries: Vec<EntryFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntryFile {
    context: Vec<String>,
    next: String,
    count: u64,
    shift_sum: [f64; 2],
    shift_count: u64,
    mean_shift: [f64; 2],
}

const TABLE_FORMAT: &str = "tpm-markov-v1";

impl From<MarkovTable> for TableFile {
    fn from(t: MarkovTable) -> Self {
        let entries = t
            .levels
            .iter()
            .flat_map(|level| {
                level.iter().flat_map(|(ctx, nexts)| {
                    nexts.iter().map(move |(next, s)| {
                        let m = s.mean_shift();
                        EntryFile {
                            context: ctx.clone(),
                            next: next.clone(),
                            count: s.count,
                            shift_sum: s.shift_sum,
                            shift_count: s.shift_count,
                            mean_shift: [m.0, m.1],
                        }
                    })
                })
            })
            .collect();
        TableFile {
            format: TABLE_FORMAT.to_string(),
            order: t.order,
            entries,
        }
    }
}

impl TryFrom<TableFile> for MarkovTable {
    type Error = String;
    fn try_from(f: TableFile) -> Result<Self, String> {
        if f.format != TABLE_FORMAT {
            return Err(format!("unsupported table format {}", f.format));
        }
        if f.order == 0 {
            return Err("order must be at least 1".into());
        }
        let mut levels = vec![Level::new(); f.order + 1];
        for e in f.entries {
            if e.context.len() > f.order {
                return Err(format!("context {:?} longer than order {}", e.context, f.order));
            }
            if e.count == 0 && e.shift_count == 0 {
                return Err("entries must have positive counts".into());
            }
            levels[e.context.len()].entry(e.context).or_default().insert(
                e.next,
                NextStats {
                    count: e.count,
                    shift_sum: e.shift_sum,
                    shift_count: e.shift_count,
                },
            );
        }
        if levels[0].is_empty() {
            return Err("table has no order-0 entries".into());
        }
        Ok(MarkovTable { order: f.order, levels })
    }
}

/// One labeled event: category name and location.
pub type Labeled = (String, (f64, f64));

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPrediction {
    pub category: String,
    pub location: (f64, f64),
    /// Context length actually used after backoff.
    pub order_used: usize,
    /// Empirical next-category frequencies of the selected context.
    pub counts: BTreeMap<String, u64>,
}

fn argmax(nexts: &BTreeMap<String, NextStats>) -> Option<(&String, &NextStats)> {
    // BTreeMap iterates in lexicographic order; strict > keeps the smallest on ties
    let mut best: Option<(&String, &NextStats)> = None;
    for (k, s) in nexts {
        if s.count > 0 && best.is_none_or(|(_, b)| s.count > b.count) {
            best = Some((k, s));
        }
    }
    best
}

pub fn fit_markov(sequences: &[Vec<Labeled>], k: usize) -> Result<MarkovTable, MarkovError> {
    if k == 0 {
        return Err(MarkovError::ZeroOrder);
    }
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(MarkovError::EmptyCorpus);
    }
    let mut levels = vec![Level::new(); k + 1];
    for seq in sequences {
        for (cat, _) in seq {
            levels[0].entry(Vec::new()).or_default().entry(cat.clone()).or_default().count += 1;
        }
        for i in 0..seq.len().saturating_sub(1) {
            let (next, to) = (&seq[i + 1].0, seq[i + 1].1);
            let from = seq[i].1;
            let shift = [to.0 - from.0, to.1 - from.1];
            let zero = levels[0].entry(Vec::new()).or_default().entry(next.clone()).or_default();
            zero.shift_sum[0] += shift[0];
            zero.shift_sum[1] += shift[1];
            zero.shift_count += 1;
            for (m, level) in levels.iter_mut().enumerate().skip(1) {
                if m > i + 1 {
                    break;
                }
                let ctx: Vec<String> = seq[i + 1 - m..=i].iter().map(|(c, _)| c.clone()).collect();
                let s = level.entry(ctx).or_default().entry(next.clone()).or_default();
                s.count += 1;
                s.shift_sum[0] += shift[0];
                s.shift_sum[1] += shift[1];
                s.shift_count += 1;
            }
        }
    }
    Ok(MarkovTable { order: k, levels })
}

impl MarkovTable {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Stored statistics for an exact context.
    pub fn lookup(&self, context: &[&str]) -> Option<&BTreeMap<String, NextStats>> {
        let level = self.levels.get(context.len())?;
        let key: Vec<String> = context.iter().map(|s| s.to_string()).collect();
        level.get(&key)
    }

    /// [`predict_markov`] with the context capped at `max_order` (0 gives
    /// the corpus-wide majority vote).
    pub fn predict_with_order(&self, history: &[String], current: (f64, f64), max_order: usize) -> MarkovPrediction {
        let mut m = max_order.min(self.order).min(history.len());
        loop {
            let ctx = history[history.len() - m..].to_vec();
            if let Some(nexts) = self.levels[m].get(&ctx) {
                if let Some((cat, stats)) = argmax(nexts) {
                    let shift = stats.mean_shift();
                    return MarkovPrediction {
                        category: cat.clone(),
                        location: (current.0 + shift.0, current.1 + shift.1),
                        order_used: m,
                        counts: nexts.iter().map(|(k, s)| (k.clone(), s.count)).collect(),
                    };
                }
            }
            assert!(m > 0, "fitted table always has order-0 counts");
            m -= 1;
        }
    }
}

/// Predicts the next category from the last `k` categories, backing off to
/// shorter suffixes down to the majority vote; the location is the current
/// one plus the mean shift of the chosen transition. Ties go to the
/// lexicographically smallest category.
pub fn predict_markov(table: &MarkovTable, history: &[String], current: (f64, f64)) -> MarkovPrediction {
    table.predict_with_order(history, current, table.order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(cats: &[&str]) -> Vec<Labeled> {
        cats.iter().map(|c| (c.to_string(), (0.0, 0.0))).collect()
    }

    fn hist(cats: &[&str]) -> Vec<String> {
        cats.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn hand_counts() {
        let t = fit_markov(&[corpus(&["A", "B", "A", "B"])], 1).unwrap();
        assert_eq!(t.lookup(&["A"]).unwrap()["B"].count, 2);
        assert_eq!(t.lookup(&["B"]).unwrap()["A"].count, 1);
        assert_eq!(t.lookup(&["A"]).unwrap().len(), 1);
        assert_eq!(t.lookup(&["B"]).unwrap().len(), 1);

        let t = fit_markov(&[corpus(&["A", "B", "C"])], 2).unwrap();
        assert_eq!(t.levels[2].len(), 1);
        assert_eq!(t.lookup(&["A", "B"]).unwrap()["C"].count, 1);
    }

    #[test]
    fn mean_shift() {
        let seq = vec![
            ("A".to_string(), (0.0, 0.0)),
            ("B".to_string(), (1.0, 0.0)),
            ("A".to_string(), (1.0, 0.0)),
            ("B".to_string(), (4.0, 0.0)),
        ];
        let t = fit_markov(&[seq], 1).unwrap();
        assert_eq!(t.lookup(&["A"]).unwrap()["B"].mean_shift(), (2.0, 0.0));
        let p = predict_markov(&t, &hist(&["A"]), (10.0, 5.0));
        assert_eq!(p.location, (12.0, 5.0));
    }

    #[test]
    fn predictions_and_backoff() {
        let t = fit_markov(&[corpus(&["A", "B", "A", "B"])], 1).unwrap();
        assert_eq!(predict_markov(&t, &hist(&["B", "A"]), (0.0, 0.0)).category, "B");

        let t = fit_markov(&[corpus(&["A", "B", "A", "B", "A"])], 1).unwrap();
        let p = predict_markov(&t, &hist(&["X"]), (0.0, 0.0));
        assert_eq!((p.category.as_str(), p.order_used), ("A", 0));

        let t = fit_markov(&[corpus(&["A", "C", "B", "A", "C", "C"])], 3).unwrap();
        let short = predict_markov(&t, &hist(&["A"]), (0.0, 0.0));
        assert_eq!(short, t.predict_with_order(&hist(&["A"]), (0.0, 0.0), 1));
        assert_eq!(short.category, "C");
    }

    #[test]
    fn ties_go_to_smallest_name() {
        let t = fit_markov(&[corpus(&["Z", "B", "Z", "A"])], 1).unwrap();
        assert_eq!(predict_markov(&t, &hist(&["Z"]), (0.0, 0.0)).category, "A");
        assert_eq!(t.predict_with_order(&[], (0.0, 0.0), 0).category, "Z");
    }

    #[test]
    fn errors() {
        assert_eq!(fit_markov(&[corpus(&["A"])], 0), Err(MarkovError::ZeroOrder));
        assert_eq!(fit_markov(&[vec![]], 2), Err(MarkovError::EmptyCorpus));
    }

    #[test]
    fn json_round_trip() {
        let t = fit_markov(&[corpus(&["A", "B", "C", "A", "B", "B"])], 3).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: MarkovTable = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
    }
}
