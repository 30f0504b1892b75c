//! Event sequences over dense frame streams: types, JSONL storage,
//! validation, frame construction and a synthetic generator.

mod frames;
mod io;
mod synth;
mod validate;

use serde::{Deserialize, Serialize};

use crate::classical::History;

pub use frames::{build_frames, AgentTrajectory, OrderingRule};
pub use io::{header_path, read_dataset, read_raw, write_dataset, RawEvent, RawFrame, RawSequence};
pub use synth::{generate_synthetic, CategorySpec, Court, SynthConfig};
pub use validate::{validate_dataset, ValidationIssue};

pub const DATASET_FORMAT: &str = "tpm-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("dataset failed validation with {} issue(s); first: {}", .0.len(), .0.first().map(|i| i.to_string()).unwrap_or_default())]
    Invalid(Vec<ValidationIssue>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("agent {agent} has no sample covering t = {t}")]
    Extrapolation { agent: String, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub features: Vec<f64>,
}

/// A point event annotated on one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub frame: usize,
    pub t: f64,
    /// Index into the dataset's class table.
    pub category: usize,
    pub x: f64,
    pub y: f64,
}

impl Event {
    pub fn location(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSequence {
    pub id: String,
    pub frames: Vec<Frame>,
    pub events: Vec<Event>,
}

impl EventSequence {
    pub fn event_frames(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.frame).collect()
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t).collect()
    }

    pub fn categories(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.category).collect()
    }

    pub fn frame_features(&self) -> Vec<Vec<f64>> {
        self.frames.iter().map(|f| f.features.clone()).collect()
    }

    pub fn n_transitions(&self) -> usize {
        self.events.len().saturating_sub(1)
    }

    /// Event times as a point-process history. The first event opens the
    /// observation window and the remaining ones are the points, so the
    /// classical models see the same transitions as the neural one.
    pub fn history(&self) -> History {
        let origin = self.events.first().map(|e| e.t).unwrap_or(0.0);
        History::new(origin, self.events.iter().skip(1).map(|e| e.t).collect())
            .expect("validated sequence has increasing event times")
    }
}

/// Sidecar metadata shared by every sequence of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub classes: Vec<String>,
    pub time_unit: String,
    pub distance_unit: String,
    /// Frames per second; `None` for streams with one frame per event.
    pub frame_rate: Option<f64>,
    pub feature_dim: usize,
    /// Generator settings (including the seed) when the data is simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl DatasetHeader {
    pub fn new(classes: Vec<String>, frame_rate: Option<f64>, feature_dim: usize) -> Self {
        Self {
            format: DATASET_FORMAT.to_string(),
            version: DATASET_VERSION,
            classes,
            time_unit: "s".to_string(),
            distance_unit: "ft".to_string(),
            frame_rate,
            feature_dim,
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub sequences: Vec<EventSequence>,
}

impl Dataset {
    pub fn classes(&self) -> &[String] {
        &self.header.classes
    }

    pub fn n_classes(&self) -> usize {
        self.header.classes.len()
    }

    pub fn n_events(&self) -> usize {
        self.sequences.iter().map(|s| s.events.len()).sum()
    }

    pub fn n_transitions(&self) -> usize {
        self.sequences.iter().map(EventSequence::n_transitions).sum()
    }

    pub fn histories(&self) -> Vec<History> {
        self.sequences.iter().map(EventSequence::history).collect()
    }

    /// Sequences `[0, at)` and `[at, n)` sharing this header.
    pub fn split_at(&self, at: usize) -> (Dataset, Dataset) {
        let at = at.min(self.sequences.len());
        let part = |s: &[EventSequence]| Dataset {
            header: self.header.clone(),
            sequences: s.to_vec(),
        };
        (part(&self.sequences[..at]), part(&self.sequences[at..]))
    }

    /// Keep at most `max_frames` leading frames per sequence and the events
    /// that fall inside them. Sequences left without events are dropped.
    pub fn truncate_frames(&self, max_frames: usize) -> Dataset {
        let sequences = self
            .sequences
            .iter()
            .filter_map(|s| {
                let events: Vec<Event> = s.events.iter().filter(|e| e.frame < max_frames).cloned().collect();
                let last = events.last()?.frame;
                Some(EventSequence {
                    id: s.id.clone(),
                    frames: s.frames[..=last].to_vec(),
                    events,
                })
            })
            .collect();
        Dataset {
            header: self.header.clone(),
            sequences,
        }
    }

    /// Dataset whose events are the given times, one frame per event with
    /// the single feature "time since previous event" and a single class.
    pub fn from_event_times(ids_and_times: Vec<(String, Vec<f64>)>) -> Self {
        let sequences = ids_and_times
            .into_iter()
            .map(|(id, times)| {
                let mut prev = times.first().copied().unwrap_or(0.0);
                let frames = times
                    .iter()
                    .map(|&t| {
                        let f = Frame {
                            t,
                            features: vec![t - prev],
                        };
                        prev = t;
                        f
                    })
                    .collect();
                let events = times
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| Event {
                        frame: i,
                        t,
                        category: 0,
                        x: 0.0,
                        y: 0.0,
                    })
                    .collect();
                EventSequence { id, frames, events }
            })
            .collect();
        Dataset {
            header: DatasetHeader::new(vec!["event".to_string()], None, 1),
            sequences,
        }
    }
}
