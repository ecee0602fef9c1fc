//! Spatial-temporal refinement of per-frame confidence maps.
//!
//! For a reference frame `t` and half-window `n`, each neighbor's features
//! and confidences are warped onto frame `t`, compared with the reference
//! through a learned transform, and fused with per-position softmax weights.
//! The fused map is then gated by a binary mask derived from the reference
//! features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{nms, Quad, ScoredQuad};
use crate::io::{FlowField, TensorGrid};

/// Parameters of `ReLU(BN(W f + b))`, applied per position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformParams {
    /// Row-major `c x c`.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub bn_shift: Vec<f64>,
    pub bn_mean: Vec<f64>,
    pub bn_var: Vec<f64>,
    #[serde(default = "default_bn_eps")]
    pub bn_eps: f64,
}

fn default_bn_eps() -> f64 {
    1e-5
}

impl TransformParams {
    /// Identity weights and an identity batch norm (with the default epsilon).
    pub fn identity(channels: usize) -> Self {
        let weight = (0..channels)
            .map(|i| (0..channels).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            weight,
            bias: vec![0.0; channels],
            bn_scale: vec![1.0; channels],
            bn_shift: vec![0.0; channels],
            bn_mean: vec![0.0; channels],
            bn_var: vec![1.0; channels],
            bn_eps: default_bn_eps(),
        }
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels();
        let vectors = [&self.bn_scale, &self.bn_shift, &self.bn_mean, &self.bn_var];
        if self.weight.len() != c
            || self.weight.iter().any(|r| r.len() != c)
            || vectors.iter().any(|v| v.len() != c)
        {
            return Err(Error::contract(format!(
                "transform parameters are not consistently sized for {c} channels"
            )));
        }
        if let Some(v) = self.bn_var.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::contract(format!("bn_var must be positive, found {v}")));
        }
        if !(self.bn_eps >= 0.0) {
            return Err(Error::contract("bn_eps must be non-negative"));
        }
        let all = self
            .weight
            .iter()
            .flatten()
            .chain(vectors.into_iter().flatten())
            .chain(&self.bias);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::contract("non-finite transform parameter"));
        }
        Ok(())
    }
}

/// Everything needed to refine the confidence map of one reference frame.
#[derive(Debug, Clone)]
pub struct AggregationWindow {
    pub n: usize,
    pub reference: u32,
    /// Features of frames `t-n ..= t+n`.
    pub features: Vec<TensorGrid>,
    /// Single-channel confidences of frames `t-n ..= t+n`.
    pub confidences: Vec<TensorGrid>,
    /// Flow from each frame toward the reference; entry `n` is the zero field.
    pub flows: Vec<FlowField>,
    pub transform: TransformParams,
}

impl AggregationWindow {
    pub fn len(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.len();
        if self.features.len() != len || self.confidences.len() != len || self.flows.len() != len {
            return Err(Error::contract(format!(
                "window n={} needs {len} features, confidences and flows; got {}, {}, {}",
                self.n,
                self.features.len(),
                self.confidences.len(),
                self.flows.len()
            )));
        }
        let (h, w) = (self.features[0].height(), self.features[0].width());
        for (f, c) in self.features.iter().zip(&self.confidences) {
            if f.height() != h || f.width() != w || c.height() != h || c.width() != w {
                return Err(Error::contract("window grids differ in size"));
            }
            if c.channels() != 1 {
                return Err(Error::contract("confidence maps must have one channel"));
            }
            if f.channels() != self.features[0].channels() {
                return Err(Error::contract("feature maps differ in channel count"));
            }
        }
        if self.flows.iter().any(|fl| fl.height() != h || fl.width() != w) {
            return Err(Error::contract("flow size differs from grids"));
        }
        if !self.flows[self.n].is_zero() {
            return Err(Error::contract("reference flow must be the zero field"));
        }
        if self.transform.channels() != self.features[0].channels() {
            return Err(Error::contract(format!(
                "transform has {} channels, features have {}",
                self.transform.channels(),
                self.features[0].channels()
            )));
        }
        self.transform.validate()
    }
}

/// Bilinear backward warp: `out(x, y) = grid(x + dx, y + dy)`, with the sample
/// position clamped to the grid.
pub fn warp(grid: &TensorGrid, flow: &FlowField) -> Result<TensorGrid> {
    let (h, w, c) = (grid.height(), grid.width(), grid.channels());
    if flow.height() != h || flow.width() != w {
        return Err(Error::contract(format!(
            "flow {}x{} does not match grid {h}x{w}",
            flow.height(),
            flow.width()
        )));
    }
    let mut out = TensorGrid::zeros(h, w, c);
    if h == 0 || w == 0 {
        return Ok(out);
    }
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = flow.at(y, x);
            let sx = (x as f64 + dx).clamp(0.0, (w - 1) as f64);
            let sy = (y as f64 + dy).clamp(0.0, (h - 1) as f64);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let dst = out.cell_mut(y, x);
            if fx == 0.0 && fy == 0.0 {
                dst.copy_from_slice(grid.cell(y0, x0));
                continue;
            }
            let (a, b) = (grid.cell(y0, x0), grid.cell(y0, x1));
            let (cc, d) = (grid.cell(y1, x0), grid.cell(y1, x1));
            for ch in 0..c {
                let top = a[ch] * (1.0 - fx) + b[ch] * fx;
                let bottom = cc[ch] * (1.0 - fx) + d[ch] * fx;
                dst[ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    Ok(out)
}

pub fn transform_features(grid: &TensorGrid, p: &TransformParams) -> Result<TensorGrid> {
    p.validate()?;
    let c = p.channels();
    if grid.channels() != c {
        return Err(Error::contract(format!(
            "grid has {} channels, transform expects {c}",
            grid.channels()
        )));
    }
    let denom: Vec<f64> = p.bn_var.iter().map(|v| (v + p.bn_eps).sqrt()).collect();
    let mut out = TensorGrid::zeros(grid.height(), grid.width(), c);
    for (src, dst) in grid
        .data()
        .chunks_exact(c.max(1))
        .zip(out.data_mut().chunks_exact_mut(c.max(1)))
    {
        for o in 0..c {
            let lin: f64 = p.weight[o].iter().zip(src).map(|(w, f)| w * f).sum::<f64>() + p.bias[o];
            let bn = p.bn_scale[o] * (lin - p.bn_mean[o]) / denom[o] + p.bn_shift[o];
            dst[o] = bn.max(0.0);
        }
    }
    Ok(out)
}

/// Channel-wise dot product at every position.
pub fn similarity_energy(a: &TensorGrid, b: &TensorGrid) -> Result<TensorGrid> {
    if !a.same_shape(b) {
        return Err(Error::contract("similarity inputs differ in shape"));
    }
    let c = a.channels().max(1);
    let data = a
        .data()
        .chunks_exact(c)
        .zip(b.data().chunks_exact(c))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    TensorGrid::new(a.height(), a.width(), 1, data)
}

/// Per-position softmax over the window of `sim * conf`.
pub fn aggregation_weights(sims: &[TensorGrid], confs: &[TensorGrid]) -> Result<Vec<TensorGrid>> {
    if sims.len() != confs.len() || sims.is_empty() {
        return Err(Error::contract(format!(
            "need equal, non-empty similarity and confidence lists ({} vs {})",
            sims.len(),
            confs.len()
        )));
    }
    let (h, w) = (sims[0].height(), sims[0].width());
    if sims
        .iter()
        .chain(confs)
        .any(|g| g.height() != h || g.width() != w || g.channels() != 1)
    {
        return Err(Error::contract("weight inputs must be single-channel and equally sized"));
    }
    let k = sims.len();
    let mut weights: Vec<TensorGrid> = (0..k).map(|_| TensorGrid::zeros(h, w, 1)).collect();
    let mut logits = vec![0.0; k];
    for pos in 0..h * w {
        for i in 0..k {
            logits[i] = sims[i].data()[pos] * confs[i].data()[pos];
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            total += *l;
        }
        for i in 0..k {
            weights[i].data_mut()[pos] = logits[i] / total;
        }
    }
    Ok(weights)
}

/// Binary mask from the mean absolute channel activation of `features`,
/// min-max normalized over the frame. A frame with no contrast (max == min)
/// carries no spatial evidence and yields an all-pass mask.
pub fn feature_mask(features: &TensorGrid, threshold: f64) -> TensorGrid {
    let (h, w) = (features.height(), features.width());
    let c = features.channels();
    let stat: Vec<f64> = if c == 0 {
        vec![0.0; h * w]
    } else {
        features
            .data()
            .chunks_exact(c)
            .map(|v| v.iter().map(|x| x.abs()).sum::<f64>() / c as f64)
            .collect()
    };
    let lo = stat.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = stat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let data = if !(hi > lo) {
        vec![1.0; h * w]
    } else {
        stat.iter()
            .map(|s| if (s - lo) / (hi - lo) >= threshold { 1.0 } else { 0.0 })
            .collect()
    };
    TensorGrid::new(h, w, 1, data).expect("mask shape")
}

/// Intermediate maps of one aggregation, exposed for inspection.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub weights: Vec<TensorGrid>,
    pub aggregated: TensorGrid,
    pub mask: TensorGrid,
    pub refined: TensorGrid,
}

/// Refined confidence of the reference frame.
pub fn aggregate(window: &AggregationWindow, mask_threshold: f64) -> Result<TensorGrid> {
    Ok(aggregate_detailed(window, mask_threshold)?.refined)
}

pub fn aggregate_detailed(window: &AggregationWindow, mask_threshold: f64) -> Result<Aggregation> {
    window.validate()?;
    let len = window.len();
    let mut warped_conf = Vec::with_capacity(len);
    let mut transformed = Vec::with_capacity(len);
    let mut reference_warped = None;
    for i in 0..len {
        let fw = warp(&window.features[i], &window.flows[i])?;
        warped_conf.push(warp(&window.confidences[i], &window.flows[i])?);
        transformed.push(transform_features(&fw, &window.transform)?);
        if i == window.n {
            reference_warped = Some(fw);
        }
    }
    let reference = &transformed[window.n];
    let sims = transformed
        .iter()
        .map(|t| similarity_energy(t, reference))
        .collect::<Result<Vec<_>>>()?;
    let weights = aggregation_weights(&sims, &warped_conf)?;

    let (h, w) = (warped_conf[0].height(), warped_conf[0].width());
    let mut aggregated = TensorGrid::zeros(h, w, 1);
    for (a, c) in weights.iter().zip(&warped_conf) {
        for ((dst, wv), cv) in aggregated.data_mut().iter_mut().zip(a.data()).zip(c.data()) {
            *dst += wv * cv;
        }
    }
    let mask = feature_mask(reference_warped.as_ref().expect("reference in window"), mask_threshold);
    let mut refined = aggregated.clone();
    for (r, m) in refined.data_mut().iter_mut().zip(mask.data()) {
        *r *= m;
    }
    Ok(Aggregation {
        weights,
        aggregated,
        mask,
        refined,
    })
}

/// Emits the adapter-provided quad of every cell whose confidence reaches
/// `conf_threshold`, then suppresses duplicates.
///
/// `geometry` has 8 channels: the quad's vertex coordinates as pixel offsets
/// from the cell center `((x + 0.5) * stride, (y + 0.5) * stride)`.
pub fn extract_quads(
    conf: &TensorGrid,
    geometry: &TensorGrid,
    stride: f64,
    conf_threshold: f64,
    nms_threshold: f64,
) -> Result<Vec<ScoredQuad>> {
    if conf.channels() != 1 {
        return Err(Error::contract("confidence map must have one channel"));
    }
    if geometry.height() != conf.height() || geometry.width() != conf.width() || geometry.channels() != 8 {
        return Err(Error::contract(format!(
            "geometry {}x{}x{} does not match confidence {}x{} with 8 channels",
            geometry.height(),
            geometry.width(),
            geometry.channels(),
            conf.height(),
            conf.width()
        )));
    }
    let mut candidates = Vec::new();
    for y in 0..conf.height() {
        for x in 0..conf.width() {
            let score = conf.get(y, x, 0);
            if score < conf_threshold {
                continue;
            }
            let cx = (x as f64 + 0.5) * stride;
            let cy = (y as f64 + 0.5) * stride;
            let g = geometry.cell(y, x);
            let mut coords = [0.0; 8];
            for k in 0..4 {
                coords[2 * k] = cx + g[2 * k];
                coords[2 * k + 1] = cy + g[2 * k + 1];
            }
            candidates.push(ScoredQuad::new(Quad::from_coords(coords), score.clamp(0.0, 1.0))?);
        }
    }
    nms(&candidates, nms_threshold)
}
