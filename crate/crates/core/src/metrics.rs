//! Evaluation: detection P/R/F, CLEAR-MOT and VACE tracking scores, selection
//! hit rates, and sequence-level end-to-end spotting.
//!
//! Rates with a zero denominator are reported as 0.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::polygon_iou;
use crate::io::{Detection, GroundTruthRecord, Quality, StreamRow};
use crate::quality::StreamDecision;
use crate::tracker::{assign, TextStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TranscriptMatch {
    #[default]
    Exact,
    CaseInsensitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingConfig {
    /// Minimum IoU for a region to count as matched (inclusive).
    pub iou_threshold: f64,
    pub transcript_match: TranscriptMatch,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            transcript_match: TranscriptMatch::Exact,
        }
    }
}

impl MatchingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold must be in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        Ok(())
    }

    pub fn texts_match(&self, a: &str, b: &str) -> bool {
        match self.transcript_match {
            TranscriptMatch::Exact => a == b,
            TranscriptMatch::CaseInsensitive => a.to_lowercase() == b.to_lowercase(),
        }
    }
}

pub fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        log::debug!("degenerate rate {num}/0 reported as 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Recognizer-call reduction of recognize-once over frame-wise reading.
/// Returns 0 when nothing was recognized.
pub fn speedup_ratio(regions_total: usize, recognitions_consumed: usize) -> f64 {
    ratio(regions_total, recognitions_consumed)
}

fn by_frame(gt: &[GroundTruthRecord]) -> BTreeMap<u32, Vec<&GroundTruthRecord>> {
    let mut m: BTreeMap<u32, Vec<&GroundTruthRecord>> = BTreeMap::new();
    for r in gt {
        m.entry(r.frame).or_default().push(r);
    }
    for v in m.values_mut() {
        v.sort_by_key(|r| r.id);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl DetectionCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn prf(&self) -> (f64, f64, f64) {
        let (p, r) = (self.precision(), self.recall());
        (p, r, harmonic(p, r))
    }
}

/// Per-frame greedy one-to-one matching, highest IoU first.
pub fn detection_counts(dets: &[Detection], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> DetectionCounts {
    let gt_frames = by_frame(gt);
    let mut det_frames: BTreeMap<u32, Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        det_frames.entry(d.frame).or_default().push(d);
    }
    let frames: BTreeSet<u32> = gt_frames.keys().chain(det_frames.keys()).copied().collect();
    let mut c = DetectionCounts::default();
    for f in frames {
        let g = gt_frames.get(&f).map_or(&[][..], Vec::as_slice);
        let d = det_frames.get(&f).map_or(&[][..], Vec::as_slice);
        let mut cand = Vec::new();
        for (i, di) in d.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                let iou = polygon_iou(&di.region.quad, &gj.quad);
                if iou >= cfg.iou_threshold {
                    cand.push((iou, i, j));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut used_d = vec![false; d.len()];
        let mut used_g = vec![false; g.len()];
        let mut tp = 0;
        for (_, i, j) in cand {
            if !used_d[i] && !used_g[j] {
                used_d[i] = true;
                used_g[j] = true;
                tp += 1;
            }
        }
        c.tp += tp;
        c.fp += d.len() - tp;
        c.fn_ += g.len() - tp;
    }
    c
}

pub fn detection_prf(dets: &[Detection], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> (f64, f64, f64) {
    detection_counts(dets, gt, cfg).prf()
}

/// Flattens tracked streams into `(frame, id, quad)` rows sorted by frame then id.
pub fn stream_rows(streams: &[TextStream]) -> Vec<StreamRow> {
    let mut rows: Vec<StreamRow> = streams
        .iter()
        .flat_map(|s| {
            s.observations.iter().map(move |o| StreamRow {
                frame: o.frame,
                id: s.id,
                quad: o.quad,
            })
        })
        .collect();
    rows.sort_by_key(|r| (r.frame, r.id));
    rows
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackingCounts {
    pub gt_regions: usize,
    pub matches: usize,
    pub iou_sum: f64,
    pub misses: usize,
    pub false_positives: usize,
    pub id_switches: usize,
    /// Sum over optimally paired streams of their temporal overlap ratio.
    pub stda: f64,
    pub gt_streams: usize,
    pub pred_streams: usize,
}

impl TrackingCounts {
    pub fn motp(&self) -> f64 {
        if self.matches == 0 {
            0.0
        } else {
            self.iou_sum / self.matches as f64
        }
    }

    pub fn mota(&self) -> f64 {
        if self.gt_regions == 0 {
            return 0.0;
        }
        1.0 - (self.misses + self.false_positives + self.id_switches) as f64 / self.gt_regions as f64
    }

    pub fn ata(&self) -> f64 {
        let den = (self.gt_streams + self.pred_streams) as f64 / 2.0;
        if den == 0.0 {
            0.0
        } else {
            self.stda / den
        }
    }
}

pub fn tracking_counts(pred: &[StreamRow], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> TrackingCounts {
    let gt_frames = by_frame(gt);
    let mut pred_frames: BTreeMap<u32, Vec<&StreamRow>> = BTreeMap::new();
    for r in pred {
        pred_frames.entry(r.frame).or_default().push(r);
    }
    for v in pred_frames.values_mut() {
        v.sort_by_key(|r| r.id);
    }
    let frames: BTreeSet<u32> = gt_frames.keys().chain(pred_frames.keys()).copied().collect();

    let mut c = TrackingCounts::default();
    // ground-truth id -> last hypothesis id it was matched to
    let mut last: BTreeMap<u32, u32> = BTreeMap::new();
    for f in &frames {
        let g = gt_frames.get(f).map_or(&[][..], Vec::as_slice);
        let p = pred_frames.get(f).map_or(&[][..], Vec::as_slice);
        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();

        // keep standing correspondences that are still valid
        for (i, gi) in g.iter().enumerate() {
            if let Some(&pid) = last.get(&gi.id) {
                if let Some(j) = p.iter().position(|r| r.id == pid) {
                    let iou = polygon_iou(&gi.quad, &p[j].quad);
                    if !p_used[j] && iou >= cfg.iou_threshold {
                        g_used[i] = true;
                        p_used[j] = true;
                        pairs.push((i, j, iou));
                    }
                }
            }
        }
        let gi_free: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let pj_free: Vec<usize> = (0..p.len()).filter(|&j| !p_used[j]).collect();
        let cost: Vec<Vec<f64>> = gi_free
            .iter()
            .map(|&i| {
                pj_free
                    .iter()
                    .map(|&j| {
                        let iou = polygon_iou(&g[i].quad, &p[j].quad);
                        if iou >= cfg.iou_threshold {
                            1.0 - iou
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        for (a, b) in assign(&cost) {
            let (i, j) = (gi_free[a], pj_free[b]);
            if let Some(&prev) = last.get(&g[i].id) {
                if prev != p[j].id {
                    c.id_switches += 1;
                }
            }
            pairs.push((i, j, 1.0 - cost[a][b]));
        }
        for &(i, j, iou) in &pairs {
            last.insert(g[i].id, p[j].id);
            c.iou_sum += iou;
        }
        c.gt_regions += g.len();
        c.matches += pairs.len();
        c.misses += g.len() - pairs.len();
        c.false_positives += p.len() - pairs.len();
    }

    // VACE: optimal one-to-one pairing of whole streams
    let mut gt_streams: BTreeMap<u32, BTreeMap<u32, &GroundTruthRecord>> = BTreeMap::new();
    for r in gt {
        gt_streams.entry(r.id).or_default().insert(r.frame, r);
    }
    let mut pred_streams: BTreeMap<u32, BTreeMap<u32, &StreamRow>> = BTreeMap::new();
    for r in pred {
        pred_streams.entry(r.id).or_default().insert(r.frame, r);
    }
    c.gt_streams = gt_streams.len();
    c.pred_streams = pred_streams.len();
    let overlap: Vec<Vec<f64>> = gt_streams
        .values()
        .map(|gs| {
            pred_streams
                .values()
                .map(|ps| {
                    let union: BTreeSet<u32> = gs.keys().chain(ps.keys()).copied().collect();
                    let sum: f64 = gs
                        .iter()
                        .filter_map(|(f, g)| ps.get(f).map(|p| polygon_iou(&g.quad, &p.quad)))
                        .sum();
                    sum / union.len() as f64
                })
                .collect()
        })
        .collect();
    let cost: Vec<Vec<f64>> = overlap
        .iter()
        .map(|row| row.iter().map(|&v| if v > 0.0 { -v } else { f64::INFINITY }).collect())
        .collect();
    c.stda = assign(&cost).iter().map(|&(i, j)| overlap[i][j]).fold(0.0, |acc, v| acc + v);
    c
}

/// `(MOTP, MOTA, ATA)`.
pub fn tracking_metrics(pred: &[StreamRow], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> (f64, f64, f64) {
    let c = tracking_counts(pred, gt, cfg);
    (c.motp(), c.mota(), c.ata())
}

/// Per-identity view of ground truth used by the stream-level metrics.
struct GtStream<'a> {
    start: u32,
    end: u32,
    transcript: &'a str,
    records: BTreeMap<u32, &'a GroundTruthRecord>,
    has_high: bool,
}

fn gt_streams(gt: &[GroundTruthRecord]) -> Vec<GtStream<'_>> {
    let mut by_id: BTreeMap<u32, Vec<&GroundTruthRecord>> = BTreeMap::new();
    for r in gt {
        by_id.entry(r.id).or_default().push(r);
    }
    by_id
        .into_values()
        .map(|rs| {
            let records: BTreeMap<u32, &GroundTruthRecord> = rs.iter().map(|r| (r.frame, *r)).collect();
            GtStream {
                start: *records.keys().next().expect("non-empty"),
                end: *records.keys().next_back().expect("non-empty"),
                transcript: &rs[0].transcript,
                has_high: rs.iter().any(|r| r.quality == Quality::High),
                records,
            }
        })
        .collect()
}

/// IoU of the decision with the ground-truth record at its frame, if the
/// frame lies inside the stream's interval and reaches the threshold.
fn located(d: &StreamDecision, g: &GtStream<'_>, cfg: &MatchingConfig) -> Option<f64> {
    if d.chosen_frame < g.start || d.chosen_frame > g.end {
        return None;
    }
    let r = g.records.get(&d.chosen_frame)?;
    let iou = polygon_iou(&d.chosen_quad, &r.quad);
    (iou >= cfg.iou_threshold).then_some(iou)
}

fn sorted_decisions(decisions: &[StreamDecision]) -> Vec<&StreamDecision> {
    let mut v: Vec<&StreamDecision> = decisions.iter().collect();
    v.sort_by_key(|d| (d.stream_id, d.chosen_frame));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EndToEndCounts {
    /// Validly recalled ground-truth streams.
    pub recalled: usize,
    pub gt_streams: usize,
    pub decisions: usize,
}

impl EndToEndCounts {
    pub fn prf(&self) -> (f64, f64, f64) {
        let p = ratio(self.recalled, self.decisions);
        let r = ratio(self.recalled, self.gt_streams);
        (p, r, harmonic(p, r))
    }
}

/// Counts the largest set of decision/ground-truth pairs that each satisfy the
/// transcript, interval and overlap constraints, with every stream on either
/// side used at most once.
pub fn end_to_end_counts(decisions: &[StreamDecision], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> EndToEndCounts {
    let gs = gt_streams(gt);
    let ds = sorted_decisions(decisions);
    let cost: Vec<Vec<f64>> = ds
        .iter()
        .map(|d| {
            gs.iter()
                .map(|g| {
                    if cfg.texts_match(&d.final_text, g.transcript) && located(d, g, cfg).is_some() {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect();
    EndToEndCounts {
        recalled: assign(&cost).len(),
        gt_streams: gs.len(),
        decisions: ds.len(),
    }
}

/// `(PRE_s, REC_s, F)`.
pub fn end_to_end(decisions: &[StreamDecision], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> (f64, f64, f64) {
    end_to_end_counts(decisions, gt, cfg).prf()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SelectionCounts {
    /// Decisions paired with a ground-truth stream by time and overlap.
    pub matched: usize,
    pub unmatched: usize,
    pub correct_text: usize,
    /// Matched decisions whose ground-truth stream has a high-quality record.
    pub qshr_eligible: usize,
    /// Matched decisions excluded from the hit rate for lacking one.
    pub qshr_excluded: usize,
    pub high_hits: usize,
}

impl SelectionCounts {
    pub fn qshr(&self) -> f64 {
        ratio(self.high_hits, self.qshr_eligible)
    }

    pub fn rcr(&self) -> f64 {
        ratio(self.correct_text, self.matched)
    }
}

/// Pairs decisions with ground-truth streams (maximum matching on interval and
/// overlap, preferring higher IoU) and scores the chosen regions.
pub fn selection_counts(decisions: &[StreamDecision], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> SelectionCounts {
    let gs = gt_streams(gt);
    let ds = sorted_decisions(decisions);
    let cost: Vec<Vec<f64>> = ds
        .iter()
        .map(|d| gs.iter().map(|g| located(d, g, cfg).map_or(f64::INFINITY, |iou| 1.0 - iou)).collect())
        .collect();
    let pairs = assign(&cost);
    let mut c = SelectionCounts {
        matched: pairs.len(),
        unmatched: ds.len() - pairs.len(),
        ..Default::default()
    };
    for (i, j) in pairs {
        let (d, g) = (ds[i], &gs[j]);
        if cfg.texts_match(&d.final_text, g.transcript) {
            c.correct_text += 1;
        }
        if g.has_high {
            c.qshr_eligible += 1;
            if g.records[&d.chosen_frame].quality == Quality::High {
                c.high_hits += 1;
            }
        } else {
            c.qshr_excluded += 1;
        }
    }
    if c.qshr_excluded > 0 {
        log::info!("{} streams without a high-quality region left out of QSHR", c.qshr_excluded);
    }
    c
}

pub fn qshr(decisions: &[StreamDecision], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> f64 {
    selection_counts(decisions, gt, cfg).qshr()
}

pub fn rcr(decisions: &[StreamDecision], gt: &[GroundTruthRecord], cfg: &MatchingConfig) -> f64 {
    selection_counts(decisions, gt, cfg).rcr()
}

/// Full evaluation of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub detection: Option<DetectionCounts>,
    pub tracking: Option<TrackingCounts>,
    pub selection: SelectionCounts,
    pub end_to_end: EndToEndCounts,
    pub regions_total: usize,
    pub recognitions_consumed: usize,
}

/// Inputs for [`evaluate`]; detections and streams are optional stages.
pub struct EvalInputs<'a> {
    pub gt: &'a [GroundTruthRecord],
    pub detections: Option<&'a [Detection]>,
    pub streams: Option<&'a [StreamRow]>,
    pub decisions: &'a [StreamDecision],
    pub regions_total: usize,
    pub recognitions_consumed: usize,
}

pub fn evaluate(inputs: &EvalInputs<'_>, cfg: &MatchingConfig) -> EvalReport {
    EvalReport {
        detection: inputs.detections.map(|d| detection_counts(d, inputs.gt, cfg)),
        tracking: inputs.streams.map(|s| tracking_counts(s, inputs.gt, cfg)),
        selection: selection_counts(inputs.decisions, inputs.gt, cfg),
        end_to_end: end_to_end_counts(inputs.decisions, inputs.gt, cfg),
        regions_total: inputs.regions_total,
        recognitions_consumed: inputs.recognitions_consumed,
    }
}

impl EvalReport {
    /// `(name, value)` pairs in a fixed order; stages that were not evaluated are omitted.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut e: Vec<(&'static str, String)> = Vec::new();
        if let Some(d) = &self.detection {
            let (p, r, f) = d.prf();
            e.push(("det_precision", p.to_string()));
            e.push(("det_recall", r.to_string()));
            e.push(("det_f", f.to_string()));
            e.push(("det_tp", d.tp.to_string()));
            e.push(("det_fp", d.fp.to_string()));
            e.push(("det_fn", d.fn_.to_string()));
        }
        if let Some(t) = &self.tracking {
            e.push(("motp", t.motp().to_string()));
            e.push(("mota", t.mota().to_string()));
            e.push(("ata", t.ata().to_string()));
            e.push(("id_switches", t.id_switches.to_string()));
        }
        let s = &self.selection;
        e.push(("qshr", s.qshr().to_string()));
        e.push(("rcr", s.rcr().to_string()));
        e.push(("qshr_excluded", s.qshr_excluded.to_string()));
        e.push(("unmatched_decisions", s.unmatched.to_string()));
        let (p, r, f) = self.end_to_end.prf();
        e.push(("pre_s", p.to_string()));
        e.push(("rec_s", r.to_string()));
        e.push(("f_score", f.to_string()));
        e.push(("n_r", self.end_to_end.recalled.to_string()));
        e.push(("n_g", self.end_to_end.gt_streams.to_string()));
        e.push(("n_d", self.end_to_end.decisions.to_string()));
        e.push(("regions_total", self.regions_total.to_string()));
        e.push(("recognitions_consumed", self.recognitions_consumed.to_string()));
        e
    }

    /// One `key=value` line per metric.
    pub fn to_key_values(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Human-readable summary.
    pub fn to_report(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.detection {
            let (p, r, f) = d.prf();
            let _ = writeln!(out, "detection   P {p:.4}  R {r:.4}  F {f:.4}  (tp {} fp {} fn {})", d.tp, d.fp, d.fn_);
        }
        if let Some(t) = &self.tracking {
            let _ = writeln!(
                out,
                "tracking    MOTP {:.4}  MOTA {:.4}  ATA {:.4}  (id switches {})",
                t.motp(),
                t.mota(),
                t.ata(),
                t.id_switches
            );
        }
        let s = &self.selection;
        let _ = writeln!(
            out,
            "selection   QSHR {:.4}  RCR {:.4}  (matched {}, unmatched {}, no-high excluded {})",
            s.qshr(),
            s.rcr(),
            s.matched,
            s.unmatched,
            s.qshr_excluded
        );
        let (p, r, f) = self.end_to_end.prf();
        let _ = writeln!(
            out,
            "end-to-end  PRE_s {p:.4}  REC_s {r:.4}  F {f:.4}  (N_r {} N_g {} N_d {})",
            self.end_to_end.recalled, self.end_to_end.gt_streams, self.end_to_end.decisions
        );
        let _ = writeln!(
            out,
            "recognition {} calls for {} regions (speedup {:.4})",
            self.recognitions_consumed,
            self.regions_total,
            speedup_ratio(self.regions_total, self.recognitions_consumed)
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Quad, ScoredQuad};
    use crate::io::Language;

    fn rec(frame: u32, id: u32, x: f64, q: Quality, t: &str) -> GroundTruthRecord {
        GroundTruthRecord {
            frame,
            id,
            quad: Quad::from_rect(x, 0.0, x + 10.0, 10.0),
            language: Language::Latin,
            quality: q,
            transcript: t.into(),
        }
    }

    fn det(frame: u32, x: f64) -> Detection {
        Detection {
            frame,
            region: ScoredQuad::new(Quad::from_rect(x, 0.0, x + 10.0, 10.0), 0.9).unwrap(),
        }
    }

    fn row(frame: u32, id: u32, x: f64) -> StreamRow {
        StreamRow { frame, id, quad: Quad::from_rect(x, 0.0, x + 10.0, 10.0) }
    }

    fn dec(id: u32, frame: u32, x: f64, t: &str) -> StreamDecision {
        StreamDecision {
            stream_id: id,
            chosen_frame: frame,
            chosen_quad: Quad::from_rect(x, 0.0, x + 10.0, 10.0),
            quality_score: 1.0,
            final_text: t.into(),
        }
    }

    #[test]
    fn detection_examples() {
        let cfg = MatchingConfig::default();
        let gt = vec![rec(0, 0, 0.0, Quality::High, "A"), rec(0, 1, 50.0, Quality::High, "B")];
        assert_eq!(detection_prf(&[det(0, 0.0), det(0, 50.0)], &gt, &cfg), (1.0, 1.0, 1.0));
        assert_eq!(detection_prf(&[], &gt, &cfg), (0.0, 0.0, 0.0));
        assert_eq!(detection_prf(&[det(0, 0.0), det(0, 200.0)], &gt, &cfg), (0.5, 0.5, 0.5));
    }

    #[test]
    fn tracking_examples() {
        let cfg = MatchingConfig::default();
        let gt: Vec<_> = (0..4).map(|f| rec(f, 0, 0.0, Quality::High, "A")).collect();
        let perfect: Vec<_> = (0..4).map(|f| row(f, 9, 0.0)).collect();
        assert_eq!(tracking_metrics(&perfect, &gt, &cfg), (1.0, 1.0, 1.0));
        assert_eq!(tracking_metrics(&[], &gt, &cfg), (0.0, 0.0, 0.0));
        let half: Vec<_> = (0..2).map(|f| row(f, 9, 0.0)).collect();
        let (motp, mota, ata) = tracking_metrics(&half, &gt, &cfg);
        assert_eq!((motp, mota, ata), (1.0, 0.5, 0.5));
    }

    #[test]
    fn identity_switch_counted() {
        let cfg = MatchingConfig::default();
        let gt: Vec<_> = (0..4).map(|f| rec(f, 0, 0.0, Quality::High, "A")).collect();
        let pred = vec![row(0, 1, 0.0), row(1, 1, 0.0), row(2, 2, 0.0), row(3, 2, 0.0)];
        let c = tracking_counts(&pred, &gt, &cfg);
        assert_eq!(c.id_switches, 1);
        assert_eq!(c.mota(), 0.75);
        assert_eq!(c.ata(), 0.5 / 1.5);
    }

    #[test]
    fn selection_examples() {
        let cfg = MatchingConfig::default();
        let mut gt = Vec::new();
        for id in 0..4u32 {
            let x = 100.0 * id as f64;
            gt.push(rec(0, id, x, Quality::High, "T"));
            gt.push(rec(1, id, x, Quality::Low, "T"));
        }
        let ds = vec![dec(0, 0, 0.0, "T"), dec(1, 0, 100.0, "T"), dec(2, 0, 200.0, "x"), dec(3, 1, 300.0, "x")];
        let c = selection_counts(&ds, &gt, &cfg);
        assert_eq!(c.qshr(), 0.75);
        assert_eq!(c.rcr(), 0.5);
    }

    #[test]
    fn stream_without_high_is_excluded() {
        let cfg = MatchingConfig::default();
        let gt = vec![rec(0, 0, 0.0, Quality::High, "A"), rec(0, 1, 100.0, Quality::Low, "B")];
        let c = selection_counts(&[dec(0, 0, 0.0, "A"), dec(1, 0, 100.0, "B")], &gt, &cfg);
        assert_eq!((c.qshr_eligible, c.qshr_excluded, c.qshr()), (1, 1, 1.0));
    }

    #[test]
    fn end_to_end_examples() {
        let cfg = MatchingConfig::default();
        let gt = vec![
            rec(0, 0, 0.0, Quality::High, "A"),
            rec(1, 0, 0.0, Quality::High, "A"),
            rec(0, 1, 100.0, Quality::High, "B"),
        ];
        assert_eq!(end_to_end(&[dec(0, 1, 0.0, "A"), dec(1, 0, 100.0, "B")], &gt, &cfg), (1.0, 1.0, 1.0));
        assert_eq!(end_to_end(&[dec(0, 0, 0.0, "A"), dec(1, 1, 0.0, "A")], &gt, &cfg), (0.5, 0.5, 0.5));
        // right text, frame outside the stream's interval
        assert_eq!(end_to_end_counts(&[dec(0, 5, 0.0, "A")], &gt, &cfg).recalled, 0);
    }

    #[test]
    fn speedup() {
        assert_eq!(speedup_ratio(71, 1), 71.0);
        assert_eq!(speedup_ratio(7, 7), 1.0);
        assert_eq!(speedup_ratio(500, 20), 25.0);
    }

    #[test]
    fn case_insensitive_transcripts() {
        let cfg = MatchingConfig { transcript_match: TranscriptMatch::CaseInsensitive, ..Default::default() };
        assert!(cfg.texts_match("Exit", "EXIT"));
        assert!(!MatchingConfig::default().texts_match("Exit", "EXIT"));
    }
}
