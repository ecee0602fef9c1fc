//! Commands wiring the stages together, shared by the CLI and the FFI layer.
//!
//! Work is spread over a rayon pool whose size comes from `VTS_THREADS`
//! (default: rayon's choice). Results are collected in input order, so the
//! outputs do not depend on the thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::{DetectorConfig, RunConfig};
use crate::detector::{aggregate, extract_quads, AggregationWindow, TransformParams};
use crate::error::{Error, Result};
use crate::geometry::polygon_iou;
use crate::io::{
    load_annotations, load_decisions, load_detections, load_flow_field, load_manifest, load_observations,
    load_streams, load_tensor_grid, save_decisions, save_detections, save_manifest, save_streams, write_atomic,
    Detection, FlowField, GroundTruthRecord, Manifest, RegionObservation,
};
use crate::metrics::{evaluate, stream_rows, EvalInputs, EvalReport};
use crate::quality::{
    apply_student, fit_student, select, teacher_training_set, PassthroughStudent, RidgeStudent, SelectionPolicy,
    StreamDecision, StudentModel,
};
use crate::simkit::{generate, write_scenario, DetectorMaps, FrameMaps, ScenarioSpec};
use crate::tracker::{track, TextStream};

pub const THREADS_ENV: &str = "VTS_THREADS";

/// Thread pool sized by `VTS_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Reads a maps directory (`features/`, `confidence/`, `geometry/`, `flow/`).
/// Frames are the grid files found under `confidence/`.
pub fn load_maps(dir: &Path, stride: f64) -> Result<DetectorMaps> {
    let conf_dir = dir.join("confidence");
    let entries = std::fs::read_dir(&conf_dir).map_err(|e| Error::io(&conf_dir, e))?;
    let mut frames: Vec<u32> = Vec::new();
    for e in entries {
        let e = e.map_err(|e| Error::io(&conf_dir, e))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(".grid") {
            let f = stem.parse().map_err(|_| Error::Parse {
                path: e.path(),
                line: 0,
                message: "grid file name is not a frame number".into(),
            })?;
            frames.push(f);
        }
    }
    frames.sort_unstable();
    let mut out = Vec::with_capacity(frames.len());
    for f in &frames {
        let name = format!("{f:06}.grid");
        out.push(FrameMaps {
            frame: *f,
            features: load_tensor_grid(dir.join("features").join(&name))?,
            confidence: load_tensor_grid(conf_dir.join(&name))?,
            geometry: load_tensor_grid(dir.join("geometry").join(&name))?,
        });
    }
    let mut flows = BTreeMap::new();
    let flow_dir = dir.join("flow");
    if flow_dir.is_dir() {
        let mut names: Vec<(u32, u32, PathBuf)> = Vec::new();
        for e in std::fs::read_dir(&flow_dir).map_err(|e| Error::io(&flow_dir, e))? {
            let e = e.map_err(|e| Error::io(&flow_dir, e))?;
            let name = e.file_name().to_string_lossy().into_owned();
            let parsed = name
                .strip_suffix(".grid")
                .and_then(|s| s.split_once('_'))
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
            if let Some((src, dst)) = parsed {
                names.push((src, dst, e.path()));
            }
        }
        names.sort();
        for (src, dst, path) in names {
            flows.insert((src, dst), load_flow_field(&path)?);
        }
    }
    Ok(DetectorMaps {
        stride,
        frames: out,
        flows,
    })
}

fn flow_name(src: u32, dst: u32) -> PathBuf {
    PathBuf::from("flow").join(format!("{src:06}_{dst:06}.grid"))
}

/// Window around the frame at position `pos`; positions past either end of
/// the video repeat the edge frame.
pub fn build_window(maps: &DetectorMaps, pos: usize, n: usize, transform: &TransformParams) -> Result<AggregationWindow> {
    let last = maps.frames.len() - 1;
    let reference = &maps.frames[pos];
    let (h, w) = (reference.confidence.height(), reference.confidence.width());
    let mut features = Vec::with_capacity(2 * n + 1);
    let mut confidences = Vec::with_capacity(2 * n + 1);
    let mut flows = Vec::with_capacity(2 * n + 1);
    for k in 0..=2 * n {
        let idx = (pos as i64 + k as i64 - n as i64).clamp(0, last as i64) as usize;
        let src = &maps.frames[idx];
        let flow = if idx == pos {
            FlowField::zero(h, w)
        } else {
            maps.flows
                .get(&(src.frame, reference.frame))
                .cloned()
                .ok_or_else(|| Error::MissingInput { path: flow_name(src.frame, reference.frame) })?
        };
        features.push(src.features.clone());
        confidences.push(src.confidence.clone());
        flows.push(flow);
    }
    Ok(AggregationWindow {
        n,
        reference: reference.frame,
        features,
        confidences,
        flows,
        transform: transform.clone(),
    })
}

/// Refines every frame's confidence and extracts its quads.
pub fn detect(maps: &DetectorMaps, cfg: &DetectorConfig, transform: Option<&TransformParams>, pool: &rayon::ThreadPool) -> Result<Vec<Detection>> {
    if maps.frames.is_empty() {
        return Ok(Vec::new());
    }
    let identity;
    let transform = match transform {
        Some(t) => t,
        None => {
            identity = TransformParams::identity(maps.frames[0].features.channels());
            &identity
        }
    };
    let per_frame: Vec<Vec<Detection>> = pool.install(|| {
        (0..maps.frames.len())
            .into_par_iter()
            .map(|pos| {
                let window = build_window(maps, pos, cfg.window_n, transform)?;
                let refined = aggregate(&window, cfg.mask_threshold)?;
                let frame = &maps.frames[pos];
                let quads = extract_quads(&refined, &frame.geometry, cfg.stride, cfg.conf_threshold, cfg.nms_threshold)?;
                Ok(quads.into_iter().map(|region| Detection { frame: frame.frame, region }).collect())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_frame.into_iter().flatten().collect())
}

/// Keeps observations that overlap a detection in their frame (IoU at least
/// `iou_threshold`), taking the detection's quad. Each detection is used once.
pub fn restrict_to_detections(observations: Vec<RegionObservation>, dets: &[Detection], iou_threshold: f64) -> Vec<RegionObservation> {
    let mut by_frame: BTreeMap<u32, Vec<(usize, &Detection)>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        by_frame.entry(d.frame).or_default().push((i, d));
    }
    let mut used = vec![false; dets.len()];
    let mut out = Vec::new();
    for mut o in observations {
        let Some(cands) = by_frame.get(&o.frame) else { continue };
        let mut best: Option<(f64, usize)> = None;
        for &(i, d) in cands {
            if used[i] {
                continue;
            }
            let iou = polygon_iou(&o.quad, &d.region.quad);
            if iou >= iou_threshold && best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, i));
            }
        }
        if let Some((_, i)) = best {
            used[i] = true;
            o.quad = dets[i].region.quad;
            out.push(o);
        }
    }
    out
}

/// Teacher-labels training observations against their ground truth and fits
/// the ridge student.
pub fn train_student(observations: &[RegionObservation], gt: &[GroundTruthRecord], cfg: &RunConfig) -> Result<RidgeStudent> {
    let training = teacher_training_set(observations, gt, cfg.matching.iou_threshold, &cfg.recommender.teacher)?;
    fit_student(&training, cfg.recommender.ridge_lambda)
}

#[derive(Debug, Clone)]
pub struct SpotOutput {
    pub streams: Vec<TextStream>,
    pub decisions: Vec<StreamDecision>,
    pub manifest: Manifest,
}

/// Tracks, scores and selects. `student` is required for the TR policy only.
pub fn spot(
    observations: &[RegionObservation],
    student: Option<&dyn StudentModel>,
    cfg: &RunConfig,
    pool: &rayon::ThreadPool,
) -> Result<SpotOutput> {
    let policy = cfg.recommender.policy;
    let tracked = track(observations, &cfg.tracker)?;
    let mut streams = tracked.streams;
    if policy == SelectionPolicy::Tr {
        let model = student.ok_or_else(|| Error::Config("policy tr needs a student model".into()))?;
        pool.install(|| {
            streams
                .par_iter_mut()
                .try_for_each(|s| apply_student(std::slice::from_mut(s), model))
        })?;
    }
    let decisions: Vec<StreamDecision> =
        pool.install(|| streams.par_iter().map(|s| select(s, policy)).collect::<Result<_>>())?;
    let regions_total: usize = streams.iter().map(TextStream::len).sum();
    let manifest = Manifest {
        policy: policy.name().to_string(),
        streams: streams.len(),
        regions_total,
        recognitions_consumed: streams.iter().map(|s| policy.recognitions_for(s.len())).sum(),
        rejected_observations: tracked.rejected.len(),
    };
    Ok(SpotOutput {
        streams,
        decisions,
        manifest,
    })
}

/// Output directory: `--out`, else `paths.out`, else `out/` beside the config.
pub fn output_dir(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| cfg.paths.out.clone())
        .unwrap_or_else(|| cfg.base_dir.join("out"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| w.write_all(text.as_bytes()))
}

/// `detect`: maps (`paths.maps`, default `maps/`) to `detections.txt`.
/// Returns per-frame detection counts.
pub fn run_detect(cfg: &RunConfig, out: &Path, pool: &rayon::ThreadPool) -> Result<Vec<(u32, usize)>> {
    let dir = cfg.input(&cfg.paths.maps, "maps");
    let maps = load_maps(&dir, cfg.detector.stride)?;
    let transform = match &cfg.detector.transform {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let t: TransformParams = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            t.validate().map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Some(t)
        }
        None => None,
    };
    let dets = detect(&maps, &cfg.detector, transform.as_ref(), pool)?;
    ensure_dir(out)?;
    save_detections(out.join("detections.txt"), &dets)?;
    let mut counts: Vec<(u32, usize)> = maps.frames.iter().map(|f| (f.frame, 0)).collect();
    for d in &dets {
        if let Ok(i) = counts.binary_search_by_key(&d.frame, |c| c.0) {
            counts[i].1 += 1;
        }
    }
    Ok(counts)
}

fn load_student(cfg: &RunConfig, observations: &[RegionObservation], out: &Path) -> Result<Option<Box<dyn StudentModel>>> {
    if cfg.recommender.policy != SelectionPolicy::Tr {
        return Ok(None);
    }
    if let Some(p) = &cfg.paths.student_model {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let model: RidgeStudent = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if model.fit.is_none() {
            return Err(Error::Config(format!("{}: student model is not fitted", p.display())));
        }
        return Ok(Some(Box::new(model)));
    }
    if let (Some(obs), Some(gt)) = (&cfg.paths.training_observations, &cfg.paths.training_annotations) {
        let model = train_student(&load_observations(obs)?, &load_annotations(gt)?, cfg)?;
        let json = serde_json::to_string_pretty(&model).map_err(|e| Error::contract(e.to_string()))?;
        write_text(&out.join("student.json"), &(json + "\n"))?;
        return Ok(Some(Box::new(model)));
    }
    if !observations.is_empty() && observations.iter().all(|o| o.teacher_score.is_some()) {
        return Ok(Some(Box::new(PassthroughStudent)));
    }
    Err(Error::Config(
        "policy tr needs paths.student_model, training data, or stored teacher scores".into(),
    ))
}

/// `spot`: observations (optionally restricted to detections) to
/// `streams.txt`, `decisions.txt` and `manifest.txt`.
pub fn run_spot(cfg: &RunConfig, out: &Path, pool: &rayon::ThreadPool) -> Result<Manifest> {
    let mut observations = load_observations(cfg.input(&cfg.paths.observations, "observations.jsonl"))?;
    if let Some(p) = &cfg.paths.detections {
        let dets = load_detections(p)?;
        observations = restrict_to_detections(observations, &dets, cfg.matching.iou_threshold);
    }
    ensure_dir(out)?;
    let student = load_student(cfg, &observations, out)?;
    let result = spot(&observations, student.as_deref(), cfg, pool)?;
    save_streams(out.join("streams.txt"), &stream_rows(&result.streams))?;
    save_decisions(out.join("decisions.txt"), &result.decisions)?;
    save_manifest(out.join("manifest.txt"), &result.manifest)?;
    Ok(result.manifest)
}

fn optional(explicit: &Option<PathBuf>, fallback: PathBuf) -> Option<PathBuf> {
    match explicit {
        Some(p) => Some(p.clone()),
        None => fallback.is_file().then_some(fallback),
    }
}

/// `eval`: scores decisions (and streams, detections when present) against
/// the annotations; writes `report.txt` and `metrics.txt`.
pub fn run_eval(cfg: &RunConfig, out: &Path) -> Result<EvalReport> {
    let gt = load_annotations(cfg.input(&cfg.paths.annotations, "annotations.txt"))?;
    let decisions_path = cfg.paths.decisions.clone().unwrap_or_else(|| out.join("decisions.txt"));
    let decisions = load_decisions(&decisions_path)?;
    let streams = optional(&cfg.paths.streams, out.join("streams.txt")).map(load_streams).transpose()?;
    let detections = optional(&cfg.paths.detections, out.join("detections.txt")).map(load_detections).transpose()?;
    let manifest = optional(&cfg.paths.manifest, out.join("manifest.txt")).map(load_manifest).transpose()?;
    let inputs = EvalInputs {
        gt: &gt,
        detections: detections.as_deref(),
        streams: streams.as_deref(),
        decisions: &decisions,
        regions_total: manifest.as_ref().map_or(0, |m| m.regions_total),
        recognitions_consumed: manifest.as_ref().map_or(0, |m| m.recognitions_consumed),
    };
    let report = evaluate(&inputs, &cfg.matching);
    ensure_dir(out)?;
    write_text(&out.join("report.txt"), &report.to_report())?;
    write_text(&out.join("metrics.txt"), &report.to_key_values())?;
    Ok(report)
}

/// `sim`: generates a scenario and writes it under `out`.
pub fn run_sim(spec: &ScenarioSpec, out: &Path) -> Result<usize> {
    let scenario = generate(spec)?;
    write_scenario(&scenario, out)?;
    Ok(scenario.observations.len())
}

/// Loads a scenario spec from TOML.
pub fn load_spec(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: ScenarioSpec =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}
