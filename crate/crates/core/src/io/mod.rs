//! File formats and adapter-side data: everything the neural stages would
//! produce (grids, flows, embeddings, recognition hypotheses) plus the
//! ground-truth annotation schema.

mod grid;
mod recognizer;
mod text;

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Quad;

pub use grid::{
    load_flow_field, load_tensor_grid, save_flow_field, save_tensor_grid, FlowField, TensorGrid,
    GRID_MAGIC,
};
pub use recognizer::{
    char_anchor, confusable, synthetic_recognizer, synthetic_recognizer_traced, ErrorModel,
    Substitution, TraceEvent,
};
pub use text::{
    load_annotations, load_decisions, load_detections, load_manifest, load_observations,
    load_streams, parse_annotations, save_annotations, save_decisions, save_detections,
    save_manifest, save_observations, save_streams, Detection, Manifest, StreamRow,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    High,
    Moderate,
    Low,
}

impl Quality {
    pub const ALL: [Quality; 3] = [Quality::High, Quality::Moderate, Quality::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Quality::High => "high",
            Quality::Moderate => "moderate",
            Quality::Low => "low",
        }
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "high" => Ok(Quality::High),
            "moderate" => Ok(Quality::Moderate),
            "low" => Ok(Quality::Low),
            other => Err(format!("unknown quality label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    Latin,
    NonLatin,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Language::Latin => "Latin",
            Language::NonLatin => "NonLatin",
        })
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Latin" => Ok(Language::Latin),
            "NonLatin" => Ok(Language::NonLatin),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

/// Output of a recognizer on one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognitionHypothesis {
    pub text: String,
    /// One probability per character of `text`.
    pub char_probs: Vec<f64>,
    /// One feature row per character of `text`.
    pub char_features: Vec<Vec<f64>>,
}

impl RecognitionHypothesis {
    pub fn validate(&self) -> Result<()> {
        let n = self.text.chars().count();
        if self.char_probs.len() != n || self.char_features.len() != n {
            return Err(Error::contract(format!(
                "hypothesis {:?}: {} chars, {} probs, {} feature rows",
                self.text,
                n,
                self.char_probs.len(),
                self.char_features.len()
            )));
        }
        if self
            .char_probs
            .iter()
            .any(|p| !p.is_finite() || !(0.0..=1.0).contains(p))
        {
            return Err(Error::contract("character probability outside [0, 1]"));
        }
        if let Some(first) = self.char_features.first() {
            if self.char_features.iter().any(|r| r.len() != first.len()) {
                return Err(Error::contract("ragged character feature matrix"));
            }
        }
        Ok(())
    }

    /// Mean character probability; 0 for an empty string.
    pub fn mean_prob(&self) -> f64 {
        if self.char_probs.is_empty() {
            0.0
        } else {
            self.char_probs.iter().sum::<f64>() / self.char_probs.len() as f64
        }
    }
}

/// One localized text region in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionObservation {
    pub frame: u32,
    pub quad: Quad,
    pub embedding: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<RecognitionHypothesis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_score: Option<f64>,
}

impl RegionObservation {
    pub fn new(frame: u32, quad: Quad, embedding: Vec<f64>) -> Self {
        Self {
            frame,
            quad,
            embedding,
            hypothesis: None,
            teacher_score: None,
            student_score: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub frame: u32,
    pub id: u32,
    pub quad: Quad,
    pub language: Language,
    pub quality: Quality,
    pub transcript: String,
}

/// Writes through a temp file in the destination directory, then renames.
pub(crate) fn write_atomic(
    path: &Path,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
