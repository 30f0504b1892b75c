//! JSONL storage. Each line of the data file is one sequence:
//!
//! ```text
//! {"id":"s0","frames":[{"t":0.0,"features":[..]}],"events":[{"frame":0,"t":0.0,"category":"pass","x":1.0,"y":2.0}]}
//! ```
//!
//! The class table, units and frame rate live in `<data path>.header.json`.
//! Floats are written in shortest round-trip form, so reading a written
//! file reproduces every value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{validate_dataset, DataError, Dataset, DatasetHeader, Frame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFrame {
    pub t: f64,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub frame: usize,
    pub t: f64,
    pub category: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSequence {
    pub id: String,
    pub frames: Vec<RawFrame>,
    pub events: Vec<RawEvent>,
}

pub fn header_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(".header.json");
    PathBuf::from(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<(), DataError> {
    let hp = header_path(path);
    let header = serde_json::to_string_pretty(&dataset.header).expect("header serializes");
    std::fs::write(&hp, header + "\n").map_err(io_err(&hp))?;

    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for seq in &dataset.sequences {
        let raw = RawSequence {
            id: seq.id.clone(),
            frames: seq
                .frames
                .iter()
                .map(|f: &Frame| RawFrame {
                    t: f.t,
                    features: f.features.clone(),
                })
                .collect(),
            events: seq
                .events
                .iter()
                .map(|e| RawEvent {
                    frame: e.frame,
                    t: e.t,
                    category: dataset.header.classes[e.category].clone(),
                    x: e.x,
                    y: e.y,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &raw).expect("sequence serializes");
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

/// Parses the header and every non-blank line without validating them.
pub fn read_raw(path: &Path) -> Result<(DatasetHeader, Vec<RawSequence>), DataError> {
    let hp = header_path(path);
    let text = std::fs::read_to_string(&hp).map_err(io_err(&hp))?;
    let header: DatasetHeader = serde_json::from_str(&text).map_err(|source| DataError::Json {
        path: hp.display().to_string(),
        line: source.line(),
        source,
    })?;
    let file = File::open(path).map_err(io_err(path))?;
    let mut sequences = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSequence = serde_json::from_str(&line).map_err(|source| DataError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        sequences.push(raw);
    }
    Ok((header, sequences))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DataError> {
    let (header, raw) = read_raw(path)?;
    validate_dataset(header, raw).map_err(DataError::Invalid)
}
