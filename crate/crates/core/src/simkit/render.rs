//! Dense maps standing in for a detector backbone's outputs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{seed_mix, ScenarioSpec, StreamTrack, LANE_CELLS, STRIDE, TEXT_ROWS};
use crate::error::{Error, Result};
use crate::io::{save_flow_field, save_tensor_grid, FlowField, TensorGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSpec {
    pub feature_channels: usize,
    /// Flows are produced for every frame pair at most this far apart.
    pub flow_radius: u32,
    /// L2 norm of each stream's feature vector; large values make the
    /// reference frame dominate its own softmax window.
    pub feature_norm: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            feature_channels: 4,
            flow_radius: 2,
            feature_norm: 3.0,
        }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.feature_channels == 0 || !(self.feature_norm > 0.0) {
            return Err(Error::Config("render needs feature_channels >= 1 and feature_norm > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMaps {
    pub frame: u32,
    pub features: TensorGrid,
    pub confidence: TensorGrid,
    /// 8 channels of vertex offsets from the cell center, in pixels.
    pub geometry: TensorGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorMaps {
    pub stride: f64,
    pub frames: Vec<FrameMaps>,
    /// Keyed by `(source, reference)`: warping the source frame with this
    /// flow aligns it to the reference frame.
    pub flows: BTreeMap<(u32, u32), FlowField>,
}

impl DetectorMaps {
    /// `features/`, `confidence/`, `geometry/` with `{frame:06}.grid`, and
    /// `flow/{source:06}_{reference:06}.grid`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for sub in ["features", "confidence", "geometry", "flow"] {
            let d = dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        for f in &self.frames {
            let name = format!("{:06}.grid", f.frame);
            save_tensor_grid(dir.join("features").join(&name), &f.features)?;
            save_tensor_grid(dir.join("confidence").join(&name), &f.confidence)?;
            save_tensor_grid(dir.join("geometry").join(&name), &f.geometry)?;
        }
        for ((src, dst), flow) in &self.flows {
            save_flow_field(dir.join("flow").join(format!("{src:06}_{dst:06}.grid")), flow)?;
        }
        Ok(())
    }
}

fn stream_feature(spec: &ScenarioSpec, r: &RenderSpec, id: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_mix(&[spec.seed, id as u64, 3]));
    let v: Vec<f64> = (0..r.feature_channels).map(|_| 0.5 + rng.random::<f64>()).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x * r.feature_norm / n).collect()
}

/// Cells covered by `t` at `frame`, as `(row, col)`.
fn cells(t: &StreamTrack, frame: u32) -> impl Iterator<Item = (usize, usize)> + '_ {
    let (x, y) = t.cell_origin(frame);
    (y..y + TEXT_ROWS).flat_map(move |row| (0..t.width_cells).map(move |c| (row, (x as usize) + c)))
}

pub(super) fn render(spec: &ScenarioSpec, r: &RenderSpec, tracks: &[StreamTrack], n_frames: u32) -> Result<DetectorMaps> {
    let h = spec.lanes.min(spec.n_streams) * LANE_CELLS;
    let w = spec.scene_width_cells;
    let feats: Vec<Vec<f64>> = tracks.iter().map(|t| stream_feature(spec, r, t.id)).collect();
    let mut frames = Vec::with_capacity(n_frames as usize);
    for frame in 0..n_frames {
        let mut features = TensorGrid::zeros(h, w, r.feature_channels);
        let mut confidence = TensorGrid::zeros(h, w, 1);
        let mut geometry = TensorGrid::zeros(h, w, 8);
        for (t, f) in tracks.iter().zip(&feats).filter(|(t, _)| t.contains(frame)) {
            let corners = t.quad_at(frame).coords();
            for (row, col) in cells(t, frame) {
                features.cell_mut(row, col).copy_from_slice(f);
                confidence.set(row, col, 0, 1.0);
                let (cx, cy) = ((col as f64 + 0.5) * STRIDE, (row as f64 + 0.5) * STRIDE);
                let g = geometry.cell_mut(row, col);
                for k in 0..4 {
                    g[2 * k] = corners[2 * k] - cx;
                    g[2 * k + 1] = corners[2 * k + 1] - cy;
                }
            }
        }
        frames.push(FrameMaps {
            frame,
            features,
            confidence,
            geometry,
        });
    }

    let mut flows = BTreeMap::new();
    for reference in 0..n_frames {
        let lo = reference.saturating_sub(r.flow_radius);
        let hi = (reference + r.flow_radius).min(n_frames.saturating_sub(1));
        for source in lo..=hi {
            if source == reference {
                continue;
            }
            let mut flow = FlowField::zero(h, w);
            for t in tracks.iter().filter(|t| t.contains(reference) && t.contains(source)) {
                let dx = (t.vx * (source as i64 - reference as i64)) as f64;
                for (row, col) in cells(t, reference) {
                    flow.set(row, col, dx, 0.0);
                }
            }
            flows.insert((source, reference), flow);
        }
    }
    Ok(DetectorMaps {
        stride: STRIDE,
        frames,
        flows,
    })
}
