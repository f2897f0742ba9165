//! Line-delimited JSON records: the detection log and ground truth.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::classifier::MaskLabel;
use crate::detector::BoundingBox;
use crate::error::{Error, Result};

/// One classified face. Coordinates are whole pixels inside the frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: usize,
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub label: MaskLabel,
    pub confidence: f32,
    pub face_score: f32,
}

impl Detection {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::new(self.x1 as f32, self.y1 as f32, self.x2 as f32, self.y2 as f32)
    }
}

/// One annotated face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub frame: usize,
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
    pub label: MaskLabel,
}

impl GroundTruthEntry {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::new(self.x1, self.y1, self.x2, self.y2)
    }
}

/// Parses one record per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(reader: impl BufRead, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(BufReader::new(file), path)
}

/// Reads ground truth and rejects degenerate boxes.
pub fn read_truth(path: impl AsRef<Path>) -> Result<Vec<GroundTruthEntry>> {
    let path = path.as_ref();
    let entries: Vec<GroundTruthEntry> = read_jsonl(path)?;
    for (i, e) in entries.iter().enumerate() {
        if !e.bbox().is_valid() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("invalid box ({}, {}, {}, {})", e.x1, e.y1, e.x2, e.y2),
            });
        }
    }
    Ok(entries)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(records: &[T], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(to_jsonl(records).as_bytes()))
        .map_err(|e| Error::io(path, e))
}
