//! Quality scoring and per-stream region selection.
//!
//! A teacher scores regions offline against a template estimated from the
//! correctly recognized regions of the stream; a student regresses those
//! scores online. Selection then picks one region per stream, the only one
//! that is recognized.

mod student;
mod template;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{polygon_iou, Quad};
use crate::io::{GroundTruthRecord, RegionObservation};
use crate::tracker::TextStream;

pub use student::{fit_student, PassthroughStudent, RidgeFit, RidgeStudent, StudentModel};
pub use template::{estimate_template, kmeans, pad_flatten, teacher_score, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPolicy {
    /// Highest student quality score.
    #[default]
    Tr,
    /// Highest mean character probability.
    Pcw,
    /// Most frequent recognized string.
    Hfp,
}

impl SelectionPolicy {
    pub fn name(self) -> &'static str {
        match self {
            SelectionPolicy::Tr => "TR",
            SelectionPolicy::Pcw => "PCW",
            SelectionPolicy::Hfp => "HFP",
        }
    }

    /// Recognizer calls spent on a stream of `len` regions. Only TR decides
    /// before recognizing; the baselines read every region.
    pub fn recognitions_for(self, len: usize) -> usize {
        match self {
            SelectionPolicy::Tr => 1,
            SelectionPolicy::Pcw | SelectionPolicy::Hfp => len,
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tr" => Ok(SelectionPolicy::Tr),
            "pcw" => Ok(SelectionPolicy::Pcw),
            "hfp" => Ok(SelectionPolicy::Hfp),
            other => Err(format!("unknown policy {other:?} (expected tr, pcw or hfp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamDecision {
    pub stream_id: u32,
    pub chosen_frame: u32,
    pub chosen_quad: Quad,
    pub quality_score: f64,
    pub final_text: String,
}

/// Picks the one region of `stream` to recognize. Ties go to the earliest frame.
pub fn select(stream: &TextStream, policy: SelectionPolicy) -> Result<StreamDecision> {
    let obs = &stream.observations;
    if obs.is_empty() {
        return Err(Error::contract(format!("stream {} is empty", stream.id)));
    }
    let unavailable = |field| Error::PolicyUnavailable {
        policy: policy.name(),
        stream_id: stream.id,
        field,
    };
    let argmax = |scores: &[f64]| {
        (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b })
    };

    let (idx, score) = match policy {
        SelectionPolicy::Tr => {
            let scores = obs
                .iter()
                .map(|o| o.student_score.ok_or_else(|| unavailable("student_score")))
                .collect::<Result<Vec<_>>>()?;
            let i = argmax(&scores);
            (i, scores[i])
        }
        SelectionPolicy::Pcw => {
            let scores = obs
                .iter()
                .map(|o| o.hypothesis.as_ref().map(|h| h.mean_prob()).ok_or_else(|| unavailable("hypothesis")))
                .collect::<Result<Vec<_>>>()?;
            let i = argmax(&scores);
            (i, scores[i])
        }
        SelectionPolicy::Hfp => {
            // text -> (count, sum of mean probs, first index)
            let mut tally: BTreeMap<&str, (usize, f64, usize)> = BTreeMap::new();
            for (i, o) in obs.iter().enumerate() {
                let h = o.hypothesis.as_ref().ok_or_else(|| unavailable("hypothesis"))?;
                let e = tally.entry(h.text.as_str()).or_insert((0, 0.0, i));
                e.0 += 1;
                e.1 += h.mean_prob();
            }
            let mut best: Option<(usize, f64, usize)> = None;
            for &(count, sum, first) in tally.values() {
                let mean = sum / count as f64;
                let better = match best {
                    None => true,
                    Some((bc, bm, bf)) => {
                        count > bc || (count == bc && (mean > bm || (mean == bm && first < bf)))
                    }
                };
                if better {
                    best = Some((count, mean, first));
                }
            }
            let (count, _, first) = best.expect("non-empty stream");
            (first, count as f64 / obs.len() as f64)
        }
    };
    let chosen = &obs[idx];
    let text = chosen
        .hypothesis
        .as_ref()
        .ok_or_else(|| unavailable("hypothesis"))?
        .text
        .clone();
    Ok(StreamDecision {
        stream_id: stream.id,
        chosen_frame: chosen.frame,
        chosen_quad: chosen.quad,
        quality_score: score,
        final_text: text,
    })
}

/// Fills `student_score` on every observation of every stream.
pub fn apply_student(streams: &mut [TextStream], model: &dyn StudentModel) -> Result<()> {
    for s in streams {
        for o in &mut s.observations {
            o.student_score = Some(model.predict(o)?);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherConfig {
    /// Rows kept from each character feature matrix.
    pub t_max: usize,
    pub k_clusters: usize,
}

impl Default for TeacherConfig {
    fn default() -> Self {
        Self { t_max: 25, k_clusters: 1 }
    }
}

impl TeacherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_max == 0 || self.k_clusters == 0 {
            return Err(Error::Config("t_max and k_clusters must be positive".into()));
        }
        Ok(())
    }
}

/// Teacher scores for one stream of observations whose true transcript is
/// known. Regions whose hypothesis equals the transcript build the template;
/// without any, every region falls back to its mean character probability.
/// A region with no character features scores 0.
pub fn teacher_scores(observations: &[RegionObservation], transcript: &str, cfg: &TeacherConfig) -> Result<Vec<f64>> {
    let hyps = observations
        .iter()
        .map(|o| o.hypothesis.as_ref().ok_or_else(|| Error::contract("teacher needs a hypothesis on every region")))
        .collect::<Result<Vec<_>>>()?;
    let correct: Vec<Vec<Vec<f64>>> = hyps
        .iter()
        .filter(|h| h.text == transcript && !h.char_features.is_empty())
        .map(|h| h.char_features.clone())
        .collect();
    let template = match estimate_template(&correct, cfg.t_max, cfg.k_clusters) {
        Ok(t) => t,
        Err(Error::NoTemplate) => {
            log::debug!("no correct region for {transcript:?}; using mean character probability");
            return Ok(hyps.iter().map(|h| h.mean_prob()).collect());
        }
        Err(e) => return Err(e),
    };
    hyps.iter()
        .map(|h| {
            if h.char_features.iter().all(|r| r.iter().all(|v| *v == 0.0)) {
                Ok(0.0)
            } else {
                teacher_score(&h.char_features, &template)
            }
        })
        .collect()
}

/// Ground-truth identity of an observation: the record in the same frame with
/// the highest IoU, if it reaches `iou_threshold`. Ties go to the lower id.
pub fn match_ground_truth(obs: &RegionObservation, gt: &[GroundTruthRecord], iou_threshold: f64) -> Option<u32> {
    let mut best: Option<(f64, u32)> = None;
    for r in gt.iter().filter(|r| r.frame == obs.frame) {
        let iou = polygon_iou(&obs.quad, &r.quad);
        if iou >= iou_threshold && best.is_none_or(|(b, id)| iou > b || (iou == b && r.id < id)) {
            best = Some((iou, r.id));
        }
    }
    best.map(|(_, id)| id)
}

/// Teacher-labelled training pairs `(embedding, score)` from observations with
/// ground truth. Observations are grouped by matched ground-truth identity;
/// unmatched ones are skipped. Output order follows identity, then input order.
pub fn teacher_training_set(
    observations: &[RegionObservation],
    gt: &[GroundTruthRecord],
    iou_threshold: f64,
    cfg: &TeacherConfig,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut groups: BTreeMap<u32, Vec<&RegionObservation>> = BTreeMap::new();
    for o in observations {
        if let Some(id) = match_ground_truth(o, gt, iou_threshold) {
            groups.entry(id).or_default().push(o);
        }
    }
    let mut out = Vec::new();
    for (id, members) in groups {
        let transcript = &gt.iter().find(|r| r.id == id).expect("matched id exists").transcript;
        let owned: Vec<RegionObservation> = members.iter().map(|o| (*o).clone()).collect();
        let scores = teacher_scores(&owned, transcript, cfg)?;
        out.extend(owned.into_iter().zip(scores).map(|(o, s)| (o.embedding, s)));
    }
    Ok(out)
}
