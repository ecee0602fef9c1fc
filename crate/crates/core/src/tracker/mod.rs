//! Grouping region observations into text streams.
//!
//! Observations are linked frame by frame: every active stream is compared
//! with each new observation through the reciprocal-dot matching cost of
//! their unit embeddings, pairs below the similarity floor are forbidden, and
//! the remaining bipartite problem is solved optimally. Observations left
//! unmatched start new streams.

mod assignment;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::RegionObservation;

pub use assignment::{assign, assignment_cost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Appearance {
    /// Compare against the stream's most recent embedding.
    #[default]
    Latest,
    /// Compare against the normalized mean of all the stream's embeddings.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub mc_epsilon: f64,
    /// Minimum cosine similarity for a pair to be matchable.
    pub similarity_threshold: f64,
    /// Number of consecutive missed frames a stream survives.
    pub max_gap: u32,
    pub embedding_dim: usize,
    pub appearance: Appearance,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            mc_epsilon: 1e-7,
            similarity_threshold: 0.92,
            max_gap: 3,
            embedding_dim: 128,
            appearance: Appearance::Latest,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mc_epsilon > 0.0) {
            return Err(Error::Config(format!("mc_epsilon must be > 0, got {}", self.mc_epsilon)));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold < 1.0) {
            return Err(Error::Config(format!(
                "similarity_threshold must be in (0, 1), got {}",
                self.similarity_threshold
            )));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextStream {
    pub id: u32,
    /// Strictly increasing frames.
    pub observations: Vec<RegionObservation>,
    pub last_active_frame: u32,
}

impl TextStream {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// An observation the tracker refused, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub frame: u32,
    /// Position within the batch passed to the tracker.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct TrackOutput {
    pub streams: Vec<TextStream>,
    pub rejected: Vec<Rejection>,
}

/// Scales `embedding` to unit L2 norm.
pub fn normalize(embedding: &[f64]) -> Result<Vec<f64>> {
    let norm = embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::contract(format!("cannot normalize vector with norm {norm}")));
    }
    Ok(embedding.iter().map(|v| v / norm).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (q1 · q2 + eps)` for unit vectors.
pub fn matching_cost(q1: &[f64], q2: &[f64], eps: f64) -> f64 {
    1.0 / (dot(q1, q2) + eps)
}

/// A pair is matchable iff its cosine similarity reaches the configured floor.
/// Non-positive similarity is never matchable.
pub fn valid_pair(q1: &[f64], q2: &[f64], cfg: &TrackerConfig) -> bool {
    let d = dot(q1, q2);
    d > 0.0 && d >= cfg.similarity_threshold
}

#[derive(Debug, Clone)]
struct ActiveStream {
    stream: TextStream,
    appearance: Vec<f64>,
    sum: Vec<f64>,
}

/// Incremental tracker; feed frames in increasing order.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    streams: Vec<ActiveStream>,
    next_id: u32,
    last_frame: Option<u32>,
    rejected: Vec<Rejection>,
    pushed: usize,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            streams: Vec::new(),
            next_id: 0,
            last_frame: None,
            rejected: Vec::new(),
            pushed: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Streams opened so far, active or not.
    pub fn stream_count(&self) -> usize {
        self.streams.len()
    }

    fn is_active(&self, s: &ActiveStream, frame: u32) -> bool {
        let missed = frame - s.stream.last_active_frame - 1;
        missed <= self.cfg.max_gap
    }

    /// Links one frame's observations. Returns the stream id given to each
    /// observation, or `None` where it was rejected.
    pub fn push_frame(&mut self, frame: u32, observations: Vec<RegionObservation>) -> Result<Vec<Option<u32>>> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(Error::contract(format!(
                    "frames must increase: got {frame} after {last}"
                )));
            }
        }
        self.last_frame = Some(frame);
        let base = self.pushed;
        self.pushed += observations.len();

        let mut accepted: Vec<(usize, RegionObservation, Vec<f64>)> = Vec::new();
        for (k, obs) in observations.into_iter().enumerate() {
            let reason = if obs.frame != frame {
                Some(format!("observation frame {} pushed as frame {frame}", obs.frame))
            } else if obs.embedding.len() != self.cfg.embedding_dim {
                Some(format!(
                    "embedding dimension {} != configured {}",
                    obs.embedding.len(),
                    self.cfg.embedding_dim
                ))
            } else {
                None
            };
            let unit = match reason {
                Some(r) => Err(r),
                None => normalize(&obs.embedding).map_err(|e| e.to_string()),
            };
            match unit {
                Ok(u) => accepted.push((k, obs, u)),
                Err(reason) => {
                    log::warn!("frame {frame}: rejecting observation {k}: {reason}");
                    self.rejected.push(Rejection {
                        frame,
                        index: base + k,
                        reason,
                    });
                }
            }
        }

        let active: Vec<usize> = (0..self.streams.len())
            .filter(|&i| self.is_active(&self.streams[i], frame))
            .collect();
        let cost: Vec<Vec<f64>> = active
            .iter()
            .map(|&si| {
                let app = &self.streams[si].appearance;
                accepted
                    .iter()
                    .map(|(_, _, u)| {
                        if valid_pair(app, u, &self.cfg) {
                            matching_cost(app, u, self.cfg.mc_epsilon)
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            })
            .collect();
        let mut owner: Vec<Option<usize>> = vec![None; accepted.len()];
        for (r, c) in assign(&cost) {
            owner[c] = Some(active[r]);
        }

        let mut ids = vec![None; self.pushed - base];
        for ((k, obs, unit), own) in accepted.into_iter().zip(owner) {
            let id = match own {
                Some(si) => {
                    let s = &mut self.streams[si];
                    s.stream.last_active_frame = frame;
                    s.stream.observations.push(obs);
                    for (acc, v) in s.sum.iter_mut().zip(&unit) {
                        *acc += v;
                    }
                    s.appearance = match self.cfg.appearance {
                        Appearance::Latest => unit,
                        Appearance::Mean => normalize(&s.sum).unwrap_or(unit),
                    };
                    s.stream.id
                }
                None => {
                    let id = self.next_id;
                    self.next_id += 1;
                    self.streams.push(ActiveStream {
                        stream: TextStream {
                            id,
                            observations: vec![obs],
                            last_active_frame: frame,
                        },
                        sum: unit.clone(),
                        appearance: unit,
                    });
                    id
                }
            };
            ids[k] = Some(id);
        }
        Ok(ids)
    }

    pub fn finish(self) -> TrackOutput {
        TrackOutput {
            streams: self.streams.into_iter().map(|s| s.stream).collect(),
            rejected: self.rejected,
        }
    }
}

/// Tracks a flat list of observations. Frames are processed in increasing
/// order; within a frame, input order is kept (it fixes new-stream ids).
pub fn track(observations: &[RegionObservation], cfg: &TrackerConfig) -> Result<TrackOutput> {
    let mut order: Vec<usize> = (0..observations.len()).collect();
    order.sort_by_key(|&i| observations[i].frame);
    let mut tracker = Tracker::new(cfg.clone())?;
    let mut rejected_index_map = Vec::with_capacity(observations.len());
    let mut start = 0;
    while start < order.len() {
        let frame = observations[order[start]].frame;
        let end = order[start..]
            .iter()
            .position(|&i| observations[i].frame != frame)
            .map_or(order.len(), |p| start + p);
        let batch = order[start..end].iter().map(|&i| observations[i].clone()).collect();
        rejected_index_map.extend_from_slice(&order[start..end]);
        tracker.push_frame(frame, batch)?;
        start = end;
    }
    let mut out = tracker.finish();
    // report rejections against the caller's indexing
    for r in &mut out.rejected {
        r.index = rejected_index_map[r.index];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quad;

    fn obs(frame: u32, emb: &[f64]) -> RegionObservation {
        RegionObservation::new(frame, Quad::from_rect(0.0, 0.0, 1.0, 1.0), emb.to_vec())
    }

    fn cfg(dim: usize) -> TrackerConfig {
        TrackerConfig {
            embedding_dim: dim,
            ..Default::default()
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(normalize(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(normalize(&[2.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(normalize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn matching_cost_examples() {
        let a = [1.0, 0.0];
        assert!((matching_cost(&a, &a, 1e-7) - 1.0 / (1.0 + 1e-7)).abs() < 1e-15);
        assert!((matching_cost(&a, &[0.0, 1.0], 1e-7) - 1e7).abs() < 1e-6);
        let half = [0.5, 3f64.sqrt() / 2.0];
        assert!((matching_cost(&a, &half, 1e-7) - 1.0 / (0.5 + 1e-7)).abs() < 1e-12);
        assert!((matching_cost(&a, &half, 1e-7) - 1.9999996).abs() < 1e-7);
    }

    #[test]
    fn validity_floor() {
        let c = cfg(2);
        let at = |d: f64| [d, (1.0 - d * d).sqrt()];
        let a = [1.0, 0.0];
        assert!(valid_pair(&a, &at(0.95), &c));
        assert!(!valid_pair(&a, &at(0.91), &c));
        assert!(!valid_pair(&a, &at(-0.2), &c));
    }

    #[test]
    fn identical_embeddings_continue() {
        let out = track(&[obs(0, &[1.0, 0.0]), obs(1, &[1.0, 0.0])], &cfg(2)).unwrap();
        assert_eq!(out.streams.len(), 1);
        assert_eq!(out.streams[0].len(), 2);
        assert_eq!(out.streams[0].last_active_frame, 1);
    }

    #[test]
    fn orthogonal_embeddings_split() {
        let out = track(&[obs(0, &[1.0, 0.0]), obs(1, &[0.0, 1.0])], &cfg(2)).unwrap();
        assert_eq!(out.streams.len(), 2);
        assert!(out.streams.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn zero_embedding_is_reported() {
        let out = track(&[obs(0, &[1.0, 0.0]), obs(0, &[0.0, 0.0])], &cfg(2)).unwrap();
        assert_eq!(out.streams.len(), 1);
        assert_eq!(out.rejected.len(), 1);
        assert_eq!(out.rejected[0].index, 1);
    }

    #[test]
    fn gap_tolerance() {
        let mut c = cfg(2);
        c.max_gap = 1;
        let e = [1.0, 0.0];
        // one missed frame: linked
        assert_eq!(track(&[obs(0, &e), obs(2, &e)], &c).unwrap().streams.len(), 1);
        // two missed frames: new stream
        assert_eq!(track(&[obs(0, &e), obs(3, &e)], &c).unwrap().streams.len(), 2);
        c.max_gap = 0;
        assert_eq!(track(&[obs(0, &e), obs(1, &e)], &c).unwrap().streams.len(), 1);
    }

    #[test]
    fn frames_must_increase() {
        let mut t = Tracker::new(cfg(2)).unwrap();
        t.push_frame(3, vec![obs(3, &[1.0, 0.0])]).unwrap();
        assert!(t.push_frame(3, vec![]).is_err());
    }

    #[test]
    fn new_ids_follow_frame_then_input_order() {
        let out = track(
            &[obs(1, &[0.0, 1.0]), obs(0, &[1.0, 0.0]), obs(1, &[-1.0, 0.0])],
            &cfg(2),
        )
        .unwrap();
        let firsts: Vec<(u32, Vec<f64>)> = out
            .streams
            .iter()
            .map(|s| (s.id, s.observations[0].embedding.clone()))
            .collect();
        assert_eq!(
            firsts,
            vec![(0, vec![1.0, 0.0]), (1, vec![0.0, 1.0]), (2, vec![-1.0, 0.0])]
        );
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(2);
        c.similarity_threshold = 1.0;
        assert!(Tracker::new(c).is_err());
        let mut c = cfg(2);
        c.mc_epsilon = 0.0;
        assert!(Tracker::new(c).is_err());
    }
}
