//! Line-oriented text formats. All are tab-separated, one record per line;
//! blank lines and lines starting with `#` are skipped.
//!
//! * annotations: `frame id x1 y1 x2 y2 x3 y3 x4 y4 language quality transcript`
//! * detections:  `frame x1 y1 .. y4 score`
//! * streams:     `frame id x1 y1 .. y4`
//! * decisions:   `stream_id frame x1 y1 .. y4 quality_score text`
//! * manifest:    `key=value`
//!
//! Observations are JSON lines (one [`RegionObservation`] per line).

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Quad, ScoredQuad};
use crate::quality::StreamDecision;

use super::{write_atomic, GroundTruthRecord, RegionObservation};

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Yields `(line_number, fields)` for every non-comment line.
fn records(content: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    content.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

struct LineCtx<'a> {
    path: &'a Path,
    line: usize,
}

impl LineCtx<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.err(format!("invalid {what} {s:?}")))
    }

    fn quad(&self, fields: &[&str]) -> Result<Quad> {
        if fields.len() != 8 {
            return Err(self.err(format!("polygon needs 8 numbers, found {}", fields.len())));
        }
        let mut c = [0.0; 8];
        for (slot, f) in c.iter_mut().zip(fields) {
            let v: f64 = self.num(f, "coordinate")?;
            if !v.is_finite() {
                return Err(self.err("non-finite coordinate"));
            }
            *slot = v;
        }
        Ok(Quad::from_coords(c))
    }

    fn expect_len(&self, fields: &[&str], n: usize) -> Result<()> {
        if fields.len() != n {
            return Err(self.err(format!("expected {n} fields, found {}", fields.len())));
        }
        Ok(())
    }
}

fn push_quad(line: &mut String, q: &Quad) {
    for c in q.coords() {
        line.push('\t');
        line.push_str(&c.to_string());
    }
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    write_atomic(path, |w| {
        for l in lines {
            w.write_all(l.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Parses annotation text; `path` only labels errors.
pub fn parse_annotations(content: &str, path: &Path) -> Result<Vec<GroundTruthRecord>> {
    let mut out = Vec::new();
    for (line, f) in records(content) {
        let ctx = LineCtx { path, line };
        if f.len() < 13 {
            // a short row is usually a polygon with the wrong number of coordinates
            let coords = f.len().saturating_sub(5);
            return Err(ctx.err(format!(
                "expected frame, id, 8 polygon numbers, language, quality, transcript; found {} fields ({coords} polygon numbers)",
                f.len()
            )));
        }
        let transcript = f[12..].join("\t");
        let record = GroundTruthRecord {
            frame: ctx.num(f[0], "frame")?,
            id: ctx.num(f[1], "id")?,
            quad: ctx.quad(&f[2..10])?,
            language: f[10].parse().map_err(|e: String| ctx.err(e))?,
            quality: f[11].parse().map_err(|e: String| ctx.err(e))?,
            transcript,
        };
        out.push(record);
    }
    out.sort_by_key(|r| (r.frame, r.id));
    let mut seen = BTreeSet::new();
    for r in &out {
        if !seen.insert((r.frame, r.id)) {
            return Err(Error::DuplicateIdentity {
                frame: r.frame,
                id: r.id,
            });
        }
    }
    Ok(out)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<GroundTruthRecord>> {
    let path = path.as_ref();
    parse_annotations(&read_text(path)?, path)
}

pub fn save_annotations(path: impl AsRef<Path>, records: &[GroundTruthRecord]) -> Result<()> {
    write_lines(
        path.as_ref(),
        records.iter().map(|r| {
            let mut l = format!("{}\t{}", r.frame, r.id);
            push_quad(&mut l, &r.quad);
            l.push_str(&format!("\t{}\t{}\t{}", r.language, r.quality, r.transcript));
            l
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub region: ScoredQuad,
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let content = read_text(path)?;
    let mut out = Vec::new();
    for (line, f) in records(&content) {
        let ctx = LineCtx { path, line };
        ctx.expect_len(&f, 10)?;
        let score: f64 = ctx.num(f[9], "score")?;
        out.push(Detection {
            frame: ctx.num(f[0], "frame")?,
            region: ScoredQuad::new(ctx.quad(&f[1..9])?, score).map_err(|e| ctx.err(e.to_string()))?,
        });
    }
    Ok(out)
}

pub fn save_detections(path: impl AsRef<Path>, dets: &[Detection]) -> Result<()> {
    write_lines(
        path.as_ref(),
        dets.iter().map(|d| {
            let mut l = d.frame.to_string();
            push_quad(&mut l, &d.region.quad);
            l.push_str(&format!("\t{}", d.region.score));
            l
        }),
    )
}

/// One tracked region with its assigned stream id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamRow {
    pub frame: u32,
    pub id: u32,
    pub quad: Quad,
}

pub fn load_streams(path: impl AsRef<Path>) -> Result<Vec<StreamRow>> {
    let path = path.as_ref();
    let content = read_text(path)?;
    let mut out = Vec::new();
    for (line, f) in records(&content) {
        let ctx = LineCtx { path, line };
        ctx.expect_len(&f, 10)?;
        out.push(StreamRow {
            frame: ctx.num(f[0], "frame")?,
            id: ctx.num(f[1], "id")?,
            quad: ctx.quad(&f[2..10])?,
        });
    }
    Ok(out)
}

pub fn save_streams(path: impl AsRef<Path>, rows: &[StreamRow]) -> Result<()> {
    write_lines(
        path.as_ref(),
        rows.iter().map(|r| {
            let mut l = format!("{}\t{}", r.frame, r.id);
            push_quad(&mut l, &r.quad);
            l
        }),
    )
}

pub fn load_decisions(path: impl AsRef<Path>) -> Result<Vec<StreamDecision>> {
    let path = path.as_ref();
    let content = read_text(path)?;
    let mut out = Vec::new();
    for (line, f) in records(&content) {
        let ctx = LineCtx { path, line };
        if f.len() < 12 {
            return Err(ctx.err(format!("expected at least 12 fields, found {}", f.len())));
        }
        out.push(StreamDecision {
            stream_id: ctx.num(f[0], "stream id")?,
            chosen_frame: ctx.num(f[1], "frame")?,
            chosen_quad: ctx.quad(&f[2..10])?,
            quality_score: ctx.num(f[10], "quality score")?,
            final_text: f[11..].join("\t"),
        });
    }
    Ok(out)
}

pub fn save_decisions(path: impl AsRef<Path>, decisions: &[StreamDecision]) -> Result<()> {
    write_lines(
        path.as_ref(),
        decisions.iter().map(|d| {
            let mut l = format!("{}\t{}", d.stream_id, d.chosen_frame);
            push_quad(&mut l, &d.chosen_quad);
            l.push_str(&format!("\t{}\t{}", d.quality_score, d.final_text));
            l
        }),
    )
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<Vec<RegionObservation>> {
    let path = path.as_ref();
    let content = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obs: RegionObservation = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(obs);
    }
    Ok(out)
}

pub fn save_observations(path: impl AsRef<Path>, obs: &[RegionObservation]) -> Result<()> {
    let path = path.as_ref();
    let lines: Vec<String> = obs
        .iter()
        .map(|o| serde_json::to_string(o).map_err(|e| Error::contract(e.to_string())))
        .collect::<Result<_>>()?;
    write_lines(path, lines)
}

/// Run summary for a recommendation pass.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub policy: String,
    pub streams: usize,
    pub regions_total: usize,
    pub recognitions_consumed: usize,
    pub rejected_observations: usize,
}

impl Manifest {
    pub fn speedup_ratio(&self) -> f64 {
        crate::metrics::speedup_ratio(self.regions_total, self.recognitions_consumed)
    }

    pub fn to_text(&self) -> String {
        format!(
            "policy={}\nstreams={}\nregions_total={}\nrecognitions_consumed={}\nrejected_observations={}\nspeedup_ratio={}\n",
            self.policy,
            self.streams,
            self.regions_total,
            self.recognitions_consumed,
            self.rejected_observations,
            self.speedup_ratio()
        )
    }
}

pub fn save_manifest(path: impl AsRef<Path>, m: &Manifest) -> Result<()> {
    let text = m.to_text();
    write_atomic(path.as_ref(), |w| w.write_all(text.as_bytes()))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let content = read_text(path)?;
    let mut m = Manifest::default();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let ctx = LineCtx { path, line: i + 1 };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ctx.err("expected key=value"))?;
        match k {
            "policy" => m.policy = v.to_string(),
            "streams" => m.streams = ctx.num(v, k)?,
            "regions_total" => m.regions_total = ctx.num(v, k)?,
            "recognitions_consumed" => m.recognitions_consumed = ctx.num(v, k)?,
            "rejected_observations" => m.rejected_observations = ctx.num(v, k)?,
            "speedup_ratio" => {}
            other => return Err(ctx.err(format!("unknown manifest key {other:?}"))),
        }
    }
    Ok(m)
}
