use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetHeader, Event, EventSequence, Frame, RawSequence, DATASET_FORMAT, DATASET_VERSION};

/// One violated invariant, located by sequence id (if any) and field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub sequence: Option<String>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sequence {
            Some(id) => write!(f, "sequence {id}: {}: {}", self.field, self.message),
            None => write!(f, "header: {}: {}", self.field, self.message),
        }
    }
}

// Event time must match its frame's time up to this absolute slack.
const TIME_MATCH: f64 = 1e-9;

/// Checks every invariant and converts category names to indices. Either
/// the whole input is accepted or every violation is returned.
pub fn validate_dataset(header: DatasetHeader, raw: Vec<RawSequence>) -> Result<Dataset, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    let mut hdr = |field: &str, message: String| {
        issues.push(ValidationIssue {
            sequence: None,
            field: field.to_string(),
            message,
        })
    };
    if header.format != DATASET_FORMAT {
        hdr("format", format!("expected {DATASET_FORMAT}, got {}", header.format));
    }
    if header.version != DATASET_VERSION {
        hdr("version", format!("unsupported version {}", header.version));
    }
    if header.classes.is_empty() {
        hdr("classes", "class table is empty".into());
    }
    let mut class_index = HashMap::new();
    for (i, c) in header.classes.iter().enumerate() {
        if class_index.insert(c.as_str(), i).is_some() {
            hdr("classes", format!("class {c} listed twice"));
        }
    }
    if let Some(fr) = header.frame_rate {
        if !(fr > 0.0 && fr.is_finite()) {
            hdr("frame_rate", format!("must be positive, got {fr}"));
        }
    }
    if header.feature_dim == 0 {
        hdr("feature_dim", "must be at least 1".into());
    }
    if raw.is_empty() {
        hdr("sequences", "dataset has no sequences".into());
    }

    let mut seen_ids = HashSet::new();
    let mut sequences = Vec::with_capacity(raw.len());
    for seq in raw {
        let id = seq.id.clone();
        let mut bad = |field: String, message: String| {
            issues.push(ValidationIssue {
                sequence: Some(id.clone()),
                field,
                message,
            })
        };
        if !seen_ids.insert(seq.id.clone()) {
            bad("id".into(), "duplicate sequence id".into());
        }
        if seq.frames.is_empty() {
            bad("frames".into(), "no frames".into());
        }
        for (i, f) in seq.frames.iter().enumerate() {
            if !f.t.is_finite() {
                bad(format!("frames[{i}].t"), "not finite".into());
            }
            if i > 0 && !(f.t > seq.frames[i - 1].t) {
                bad(format!("frames[{i}].t"), format!("{} does not exceed previous {}", f.t, seq.frames[i - 1].t));
            }
            if f.features.len() != header.feature_dim {
                bad(
                    format!("frames[{i}].features"),
                    format!("{} values, header declares {}", f.features.len(), header.feature_dim),
                );
            }
            if f.features.iter().any(|v| !v.is_finite()) {
                bad(format!("frames[{i}].features"), "non-finite value".into());
            }
        }
        if seq.events.is_empty() {
            bad("events".into(), "no events".into());
        }
        let mut events = Vec::with_capacity(seq.events.len());
        for (j, e) in seq.events.iter().enumerate() {
            if e.frame >= seq.frames.len() {
                bad(
                    format!("events[{j}].frame"),
                    format!("index {} beyond {} frames", e.frame, seq.frames.len()),
                );
            } else if (e.t - seq.frames[e.frame].t).abs() > TIME_MATCH || !e.t.is_finite() {
                bad(
                    format!("events[{j}].t"),
                    format!("{} differs from frame time {}", e.t, seq.frames[e.frame].t),
                );
            }
            if j > 0 && e.frame <= seq.events[j - 1].frame {
                bad(format!("events[{j}].frame"), "event frames not strictly increasing".into());
            }
            if !(e.x.is_finite() && e.y.is_finite()) {
                bad(format!("events[{j}].location"), "non-finite coordinate".into());
            }
            match class_index.get(e.category.as_str()) {
                Some(&c) => events.push(Event {
                    frame: e.frame,
                    t: e.t,
                    category: c,
                    x: e.x,
                    y: e.y,
                }),
                None => bad(format!("events[{j}].category"), format!("unknown class {}", e.category)),
            }
        }
        sequences.push(EventSequence {
            id: seq.id,
            frames: seq
                .frames
                .into_iter()
                .map(|f| Frame {
                    t: f.t,
                    features: f.features,
                })
                .collect(),
            events,
        });
    }
    if issues.is_empty() {
        Ok(Dataset { header, sequences })
    } else {
        Err(issues)
    }
}
