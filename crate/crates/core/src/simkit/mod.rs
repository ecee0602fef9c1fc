//! Seeded synthetic scenarios: ground-truth text streams moving through a
//! scene, the observations an adapter would hand over for them (quads,
//! embeddings, recognition hypotheses), and optionally the dense maps a
//! detector backbone would produce.
//!
//! Streams occupy horizontal lanes; within a lane they follow each other in
//! time, so regions never overlap. Each stream owns an identity anchor in
//! embedding space. Degradation moves embeddings along one shared direction
//! and adds noise to both embeddings and character features.

mod oracle;
mod render;

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Quad;
use crate::io::{
    save_annotations, save_observations, synthetic_recognizer, write_atomic, ErrorModel, GroundTruthRecord,
    Language, Quality, RegionObservation, Substitution,
};

pub use oracle::{brute_force_assignment, brute_force_assignment_detailed, brute_force_end_to_end};
pub use render::{DetectorMaps, FrameMaps, RenderSpec};

/// Size of one detector cell in pixels.
pub const STRIDE: f64 = 4.0;
/// Cells per lane: one spacer row, three text rows, one spacer row.
const LANE_CELLS: usize = 5;
const TEXT_ROWS: usize = 3;
const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

/// One value per quality level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityTable {
    pub high: f64,
    pub moderate: f64,
    pub low: f64,
}

impl QualityTable {
    pub const fn new(high: f64, moderate: f64, low: f64) -> Self {
        Self { high, moderate, low }
    }

    pub const fn uniform(v: f64) -> Self {
        Self::new(v, v, v)
    }

    pub fn get(&self, q: Quality) -> f64 {
        match q {
            Quality::High => self.high,
            Quality::Moderate => self.moderate,
            Quality::Low => self.low,
        }
    }

    fn values(&self) -> [f64; 3] {
        [self.high, self.moderate, self.low]
    }
}

/// How quality evolves over a stream's frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QualityCurve {
    Constant { quality: Quality },
    /// Repeats the pattern from the stream's first frame.
    Pattern { qualities: Vec<Quality> },
    /// Independent draw per frame; low takes the remaining mass.
    Random { p_high: f64, p_moderate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityProfile {
    pub curve: QualityCurve,
    /// Offset along the shared degradation direction of the embedding.
    pub embedding_shift: QualityTable,
    /// Norm of the isotropic embedding noise.
    pub embedding_noise: QualityTable,
    /// Norm of the noise added to each character feature row.
    pub char_noise: QualityTable,
}

impl Default for QualityProfile {
    fn default() -> Self {
        Self {
            curve: QualityCurve::Random {
                p_high: 0.4,
                p_moderate: 0.3,
            },
            embedding_shift: QualityTable::new(0.0, 0.15, 0.3),
            embedding_noise: QualityTable::new(0.02, 0.04, 0.06),
            char_noise: QualityTable::new(0.1, 0.4, 0.8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub n_streams: usize,
    /// Inclusive `[min, max]` stream length in frames.
    pub frames_per_stream: [u32; 2],
    pub quality_profile: QualityProfile,
    /// Minimum angle between identity anchors, in degrees.
    pub identity_separation: f64,
    /// Probability that a degraded reading flips a stream's confusable characters.
    pub recognizer_error: QualityTable,
    /// Characters per transcript that a degraded reading may flip.
    pub confusable_positions: usize,
    pub correct_confidence_floor: f64,
    pub misread_confidence_floor: f64,
    /// Inclusive `[min, max]` transcript length.
    pub transcript_len: [usize; 2],
    pub embedding_dim: usize,
    pub char_dim: usize,
    pub lanes: usize,
    /// Inclusive `[min, max]` idle frames between consecutive streams of a lane.
    pub lane_gap: [u32; 2],
    pub scene_width_cells: usize,
    pub seed: u64,
    /// Also produce detector maps.
    pub render: Option<RenderSpec>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            n_streams: 4,
            frames_per_stream: [8, 12],
            quality_profile: QualityProfile::default(),
            identity_separation: 60.0,
            recognizer_error: QualityTable::new(0.0, 0.3, 0.7),
            confusable_positions: 1,
            correct_confidence_floor: 0.7,
            misread_confidence_floor: 0.6,
            transcript_len: [4, 8],
            embedding_dim: 128,
            char_dim: 16,
            lanes: 4,
            lane_gap: [0, 2],
            scene_width_cells: 96,
            seed: 0,
            render: None,
        }
    }
}

impl ScenarioSpec {
    /// Every frame high quality, no noise, no recognition errors.
    pub fn noiseless(n_streams: usize, frames: u32) -> Self {
        Self {
            n_streams,
            frames_per_stream: [frames, frames],
            quality_profile: QualityProfile {
                curve: QualityCurve::Constant { quality: Quality::High },
                embedding_shift: QualityTable::uniform(0.0),
                embedding_noise: QualityTable::uniform(0.0),
                char_noise: QualityTable::uniform(0.0),
            },
            recognizer_error: QualityTable::uniform(0.0),
            correct_confidence_floor: 1.0,
            misread_confidence_floor: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_streams == 0 {
            return bad("n_streams must be at least 1".into());
        }
        let [lo, hi] = self.frames_per_stream;
        if lo == 0 || lo > hi {
            return bad(format!("frames_per_stream {lo}..={hi} is empty or starts at 0"));
        }
        let [tl, th] = self.transcript_len;
        if tl == 0 || tl > th {
            return bad(format!("transcript_len {tl}..={th} is invalid"));
        }
        if self.lane_gap[0] > self.lane_gap[1] {
            return bad("lane_gap range is reversed".into());
        }
        if !(self.identity_separation > 0.0 && self.identity_separation <= 90.0) {
            return bad(format!("identity_separation must be in (0, 90], got {}", self.identity_separation));
        }
        let probs = self
            .recognizer_error
            .values()
            .into_iter()
            .chain([self.correct_confidence_floor, self.misread_confidence_floor]);
        if probs.clone().any(|p| !(0.0..=1.0).contains(&p)) {
            return bad("probabilities and confidence floors must lie in [0, 1]".into());
        }
        let p = &self.quality_profile;
        let tables = [p.embedding_shift, p.embedding_noise, p.char_noise];
        if tables.iter().flat_map(QualityTable::values).any(|v| !(v >= 0.0) || !v.is_finite()) {
            return bad("quality tables must be finite and non-negative".into());
        }
        match &p.curve {
            QualityCurve::Random { p_high, p_moderate } => {
                if !(*p_high >= 0.0 && *p_moderate >= 0.0 && p_high + p_moderate <= 1.0) {
                    return bad("random quality curve needs p_high, p_moderate >= 0 summing to <= 1".into());
                }
            }
            QualityCurve::Pattern { qualities } if qualities.is_empty() => {
                return bad("quality pattern is empty".into());
            }
            _ => {}
        }
        if self.embedding_dim < 2 || self.char_dim == 0 || self.lanes == 0 {
            return bad("embedding_dim >= 2, char_dim >= 1 and lanes >= 1 are required".into());
        }
        if self.scene_width_cells < 16 {
            return bad("scene_width_cells must be at least 16".into());
        }
        if let Some(r) = &self.render {
            r.validate()?;
        }
        Ok(())
    }
}

/// True identity and quality of one generated observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLabel {
    pub stream_id: u32,
    pub quality: Quality,
}

/// Motion and appearance of one generated stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamTrack {
    pub id: u32,
    pub lane: usize,
    pub start: u32,
    pub len: u32,
    pub transcript: String,
    /// Left edge in cells at the first frame.
    pub x0: i64,
    /// Horizontal motion in cells per frame.
    pub vx: i64,
    pub width_cells: usize,
}

impl StreamTrack {
    pub fn end(&self) -> u32 {
        self.start + self.len - 1
    }

    pub fn contains(&self, frame: u32) -> bool {
        frame >= self.start && frame <= self.end()
    }

    /// Left edge and top row, in cells, at `frame`.
    pub fn cell_origin(&self, frame: u32) -> (i64, usize) {
        let x = self.x0 + self.vx * (frame as i64 - self.start as i64);
        (x, self.lane * LANE_CELLS + 1)
    }

    pub fn quad_at(&self, frame: u32) -> Quad {
        let (x, y) = self.cell_origin(frame);
        let (x0, y0) = (x as f64 * STRIDE, y as f64 * STRIDE);
        Quad::from_rect(x0, y0, x0 + self.width_cells as f64 * STRIDE, y0 + TEXT_ROWS as f64 * STRIDE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub tracks: Vec<StreamTrack>,
    /// Sorted by frame, then id.
    pub gt: Vec<GroundTruthRecord>,
    /// Sorted by frame, then stream; parallel to `labels`.
    pub observations: Vec<RegionObservation>,
    pub labels: Vec<ObservationLabel>,
    pub n_frames: u32,
    pub maps: Option<DetectorMaps>,
}

impl Scenario {
    /// Fraction of a stream's frames labelled high quality.
    pub fn high_fractions(&self) -> BTreeMap<u32, f64> {
        let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for r in &self.gt {
            let e = counts.entry(r.id).or_default();
            e.1 += 1;
            if r.quality == Quality::High {
                e.0 += 1;
            }
        }
        counts.into_iter().map(|(id, (h, n))| (id, h as f64 / n as f64)).collect()
    }

    pub fn regions_total(&self) -> usize {
        self.observations.len()
    }
}

fn seed_mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3u64, |acc, p| {
        let mut z = acc ^ p.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: Vec<f64>) -> Option<Vec<f64>> {
    let n = dotp(&v, &v).sqrt();
    (n > 1e-9).then(|| v.into_iter().map(|x| x / n).collect())
}

/// Removes the components of `v` along the (orthonormal) `basis`.
fn orthogonalize(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Vec<f64> {
    for b in basis {
        let p = dotp(&v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= p * y;
        }
    }
    v
}

/// Seed of the degradation direction. It belongs to the simulated embedding
/// model rather than to a scenario, so every scenario of a given dimension
/// degrades along the same axis and a student trained on one transfers to another.
const DEGRADATION_SEED: u64 = 0x5eed_dea1;

/// The unit direction along which low-quality embeddings drift.
pub fn degradation_direction(dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[DEGRADATION_SEED, dim as u64]));
    loop {
        if let Some(u) = unit(gaussian_vec(&mut rng, dim)) {
            return u;
        }
    }
}

/// The shared degradation direction plus `n` unit anchors orthogonal to it
/// whose pairwise angles are at least `separation_deg`.
pub fn identity_anchors(
    n: usize,
    dim: usize,
    separation_deg: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let degradation = degradation_direction(dim);
    let mut anchors: Vec<Vec<f64>> = Vec::with_capacity(n);
    if separation_deg >= 90.0 {
        if n + 1 > dim {
            return Err(Error::Feasibility(format!(
                "{n} mutually orthogonal anchors do not fit in {dim} dimensions"
            )));
        }
        let mut basis = vec![degradation.clone()];
        while anchors.len() < n {
            let v = orthogonalize(gaussian_vec(rng, dim), &basis);
            // second pass for numerical hygiene
            if let Some(u) = unit(orthogonalize(v, &basis)) {
                basis.push(u.clone());
                anchors.push(u);
            }
        }
        return Ok((degradation, anchors));
    }
    let max_cos = separation_deg.to_radians().cos();
    const ATTEMPTS: usize = 10_000;
    for k in 0..n {
        let mut placed = false;
        for _ in 0..ATTEMPTS {
            let v = orthogonalize(gaussian_vec(rng, dim), std::slice::from_ref(&degradation));
            let Some(u) = unit(v) else { continue };
            if anchors.iter().all(|a| dotp(a, &u) <= max_cos) {
                anchors.push(u);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Feasibility(format!(
                "could not place anchor {k} of {n} at {separation_deg} degrees in {dim} dimensions"
            )));
        }
    }
    Ok((degradation, anchors))
}

fn draw_quality(curve: &QualityCurve, offset: usize, rng: &mut ChaCha8Rng) -> Quality {
    match curve {
        QualityCurve::Constant { quality } => *quality,
        QualityCurve::Pattern { qualities } => qualities[offset % qualities.len()],
        QualityCurve::Random { p_high, p_moderate } => {
            let u: f64 = rng.random();
            if u < *p_high {
                Quality::High
            } else if u < p_high + p_moderate {
                Quality::Moderate
            } else {
                Quality::Low
            }
        }
    }
}

struct StreamPlan {
    track: StreamTrack,
    anchor: Vec<f64>,
    confusable: Vec<usize>,
    qualities: Vec<Quality>,
}

/// Builds a scenario; identical specs give identical scenarios.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (degradation, anchors) =
        identity_anchors(spec.n_streams, spec.embedding_dim, spec.identity_separation, &mut rng)?;

    let lanes = spec.lanes.min(spec.n_streams);
    let mut cursor = vec![0u32; lanes];
    let mut plans = Vec::with_capacity(spec.n_streams);
    for (k, anchor) in anchors.into_iter().enumerate() {
        let lane = k % lanes;
        let len = rng.random_range(spec.frames_per_stream[0]..=spec.frames_per_stream[1]);
        let start = cursor[lane];
        cursor[lane] = start + len + rng.random_range(spec.lane_gap[0]..=spec.lane_gap[1]);

        let tlen = rng.random_range(spec.transcript_len[0]..=spec.transcript_len[1]);
        let transcript: String = (0..tlen)
            .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
            .collect();
        let mut positions: Vec<usize> = (0..tlen).collect();
        for i in 0..spec.confusable_positions.min(tlen) {
            let j = rng.random_range(i..tlen);
            positions.swap(i, j);
        }
        let mut confusable = positions[..spec.confusable_positions.min(tlen)].to_vec();
        confusable.sort_unstable();

        let width_cells = (2 * tlen).clamp(6, 16).min(spec.scene_width_cells);
        let room = (spec.scene_width_cells - width_cells) as i64;
        let mut vx = rng.random_range(-1i64..=1);
        let travel = (len as i64 - 1) * vx.abs();
        if travel > room {
            vx = 0;
        }
        let span = room - (len as i64 - 1) * vx.abs();
        let offset = rng.random_range(0..=span);
        let x0 = if vx < 0 { offset + (len as i64 - 1) } else { offset };

        let qualities = (0..len as usize)
            .map(|i| draw_quality(&spec.quality_profile.curve, i, &mut rng))
            .collect();
        plans.push(StreamPlan {
            track: StreamTrack {
                id: k as u32,
                lane,
                start,
                len,
                transcript,
                x0,
                vx,
                width_cells,
            },
            anchor,
            confusable,
            qualities,
        });
    }

    let n_frames = plans.iter().map(|p| p.track.end() + 1).max().unwrap_or(0);
    let profile = &spec.quality_profile;
    let dim = spec.embedding_dim;
    let mut rows: Vec<(u32, u32, GroundTruthRecord, RegionObservation, ObservationLabel)> = Vec::new();
    for p in &plans {
        let t = &p.track;
        for (i, &q) in p.qualities.iter().enumerate() {
            let frame = t.start + i as u32;
            let quad = t.quad_at(frame);
            let mut noise_rng = ChaCha8Rng::seed_from_u64(seed_mix(&[spec.seed, t.id as u64, frame as u64, 1]));
            let sigma = profile.embedding_noise.get(q) / (dim as f64).sqrt();
            let shift = profile.embedding_shift.get(q);
            let embedding: Vec<f64> = p
                .anchor
                .iter()
                .zip(&degradation)
                .map(|(a, d)| {
                    let z: f64 = noise_rng.sample(StandardNormal);
                    a + shift * d + sigma * z
                })
                .collect();
            let flip = spec.recognizer_error.get(q);
            let mut per_pos = vec![0.0; t.transcript.chars().count()];
            for &c in &p.confusable {
                per_pos[c] = flip;
            }
            let model = ErrorModel {
                substitution: Substitution::PerPosition(per_pos),
                feature_noise: profile.char_noise.get(q),
                correct_confidence_floor: spec.correct_confidence_floor,
                misread_confidence_floor: spec.misread_confidence_floor,
                feature_dim: spec.char_dim,
            };
            let hyp = synthetic_recognizer(
                &t.transcript,
                &model,
                seed_mix(&[spec.seed, t.id as u64, frame as u64, 2]),
            );
            let mut obs = RegionObservation::new(frame, quad, embedding);
            obs.hypothesis = Some(hyp);
            let rec = GroundTruthRecord {
                frame,
                id: t.id,
                quad,
                language: Language::Latin,
                quality: q,
                transcript: t.transcript.clone(),
            };
            rows.push((frame, t.id, rec, obs, ObservationLabel { stream_id: t.id, quality: q }));
        }
    }
    rows.sort_by_key(|r| (r.0, r.1));
    let mut gt = Vec::with_capacity(rows.len());
    let mut observations = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (_, _, r, o, l) in rows {
        gt.push(r);
        observations.push(o);
        labels.push(l);
    }
    let tracks: Vec<StreamTrack> = plans.into_iter().map(|p| p.track).collect();
    let maps = match &spec.render {
        Some(r) => Some(render::render(spec, r, &tracks, n_frames)?),
        None => None,
    };
    Ok(Scenario {
        spec: spec.clone(),
        tracks,
        gt,
        observations,
        labels,
        n_frames,
        maps,
    })
}

/// Keeps the streams whose share of high-quality frames is at most
/// `max_high_fraction`. Detector maps are dropped from the result.
pub fn extreme_filter(scenario: &Scenario, max_high_fraction: f64) -> Result<Scenario> {
    if !(max_high_fraction > 0.0 && max_high_fraction < 1.0) {
        return Err(Error::contract(format!(
            "max_high_fraction must be in (0, 1), got {max_high_fraction}"
        )));
    }
    let keep: BTreeMap<u32, bool> = scenario
        .high_fractions()
        .into_iter()
        .map(|(id, f)| (id, f <= max_high_fraction))
        .collect();
    let kept = |id: u32| keep.get(&id).copied().unwrap_or(false);
    let mut observations = Vec::new();
    let mut labels = Vec::new();
    for (o, l) in scenario.observations.iter().zip(&scenario.labels) {
        if kept(l.stream_id) {
            observations.push(o.clone());
            labels.push(*l);
        }
    }
    Ok(Scenario {
        spec: scenario.spec.clone(),
        tracks: scenario.tracks.iter().filter(|t| kept(t.id)).cloned().collect(),
        gt: scenario.gt.iter().filter(|r| kept(r.id)).cloned().collect(),
        observations,
        labels,
        n_frames: scenario.n_frames,
        maps: None,
    })
}

/// Writes the scenario in the pipeline's input formats under `dir`:
/// `annotations.txt`, `observations.jsonl`, `labels.txt`, `scenario.toml` and,
/// when rendered, `maps/`.
pub fn write_scenario(scenario: &Scenario, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_annotations(dir.join("annotations.txt"), &scenario.gt)?;
    save_observations(dir.join("observations.jsonl"), &scenario.observations)?;
    let labels: String = scenario
        .observations
        .iter()
        .zip(&scenario.labels)
        .enumerate()
        .map(|(i, (o, l))| format!("{i}\t{}\t{}\t{}\n", o.frame, l.stream_id, l.quality))
        .collect();
    write_atomic(&dir.join("labels.txt"), |w| w.write_all(labels.as_bytes()))?;
    let spec = toml::to_string(&scenario.spec).map_err(|e| Error::contract(e.to_string()))?;
    write_atomic(&dir.join("scenario.toml"), |w| w.write_all(spec.as_bytes()))?;
    if let Some(maps) = &scenario.maps {
        maps.write(&dir.join("maps"))?;
    }
    Ok(())
}
