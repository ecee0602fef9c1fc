//! Run configuration, read from TOML. Unknown keys are rejected; every field
//! has a default, and relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MatchingConfig;
use crate::objectives::LossWeights;
use crate::quality::{SelectionPolicy, TeacherConfig};
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Half-width of the temporal window; 0 uses the reference frame alone.
    pub window_n: usize,
    pub mask_threshold: f64,
    pub nms_threshold: f64,
    pub conf_threshold: f64,
    /// Pixels per grid cell.
    pub stride: f64,
    /// JSON transform parameters; identity when absent.
    pub transform: Option<PathBuf>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_n: 1,
            mask_threshold: 0.5,
            nms_threshold: 0.2,
            conf_threshold: 0.8,
            stride: 4.0,
            transform: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecommenderConfig {
    pub policy: SelectionPolicy,
    pub ridge_lambda: f64,
    pub teacher: TeacherConfig,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        Self {
            policy: SelectionPolicy::Tr,
            ridge_lambda: 1e-3,
            teacher: TeacherConfig::default(),
        }
    }
}

/// Input and output locations. Unset inputs fall back to the conventional
/// file names inside the config directory (see the command docs).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub maps: Option<PathBuf>,
    pub observations: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub training_observations: Option<PathBuf>,
    pub training_annotations: Option<PathBuf>,
    pub student_model: Option<PathBuf>,
    pub streams: Option<PathBuf>,
    pub decisions: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub detector: DetectorConfig,
    pub tracker: TrackerConfig,
    pub recommender: RecommenderConfig,
    pub weights: LossWeights,
    pub matching: MatchingConfig,
    pub paths: PathsConfig,
    /// Directory relative paths were resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.resolve_paths();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Defaults with paths anchored at `base_dir`.
    pub fn with_base(base_dir: &Path) -> Self {
        Self {
            base_dir: base_dir.to_path_buf(),
            ..Self::default()
        }
    }

    fn resolve_paths(&mut self) {
        let base = self.base_dir.clone();
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        let p = &mut self.paths;
        for slot in [
            &mut p.maps,
            &mut p.observations,
            &mut p.detections,
            &mut p.annotations,
            &mut p.training_observations,
            &mut p.training_annotations,
            &mut p.student_model,
            &mut p.streams,
            &mut p.decisions,
            &mut p.manifest,
            &mut p.out,
        ] {
            fix(slot);
        }
        fix(&mut self.detector.transform);
    }

    /// `explicit` if set, else `name` inside the base directory.
    pub fn input(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.base_dir.join(name))
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.detector;
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(d.mask_threshold) {
            return Err(Error::Config(format!("mask_threshold must be in [0, 1], got {}", d.mask_threshold)));
        }
        if !(d.nms_threshold > 0.0 && d.nms_threshold < 1.0) {
            return Err(Error::Config(format!("nms_threshold must be in (0, 1), got {}", d.nms_threshold)));
        }
        if !unit(d.conf_threshold) {
            return Err(Error::Config(format!("conf_threshold must be in [0, 1], got {}", d.conf_threshold)));
        }
        if !(d.stride > 0.0 && d.stride.is_finite()) {
            return Err(Error::Config(format!("stride must be positive, got {}", d.stride)));
        }
        if !(self.recommender.ridge_lambda >= 0.0) {
            return Err(Error::Config("ridge_lambda must be >= 0".into()));
        }
        self.tracker.validate()?;
        self.recommender.teacher.validate()?;
        self.weights.validate()?;
        self.matching.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_constants() {
        let c = RunConfig::from_toml("", Path::new("/x")).unwrap();
        assert_eq!(c.detector.window_n, 1);
        assert_eq!(c.detector.nms_threshold, 0.2);
        assert_eq!(c.detector.conf_threshold, 0.8);
        assert_eq!(c.detector.mask_threshold, 0.5);
        assert_eq!(c.tracker.similarity_threshold, 0.92);
        assert_eq!(c.weights.margin, 0.8);
        assert_eq!(c.weights.lambda1, 1.0);
        assert_eq!(c.matching.iou_threshold, 0.5);
        assert_eq!(c.recommender.policy, SelectionPolicy::Tr);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1", Path::new(".")), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[tracker]\nmax_gapp = 2", Path::new(".")).is_err());
    }

    #[test]
    fn relative_paths_resolve() {
        let c = RunConfig::from_toml("[paths]\nobservations = \"obs.jsonl\"\nout = \"/abs\"", Path::new("/cfg")).unwrap();
        assert_eq!(c.paths.observations.unwrap(), PathBuf::from("/cfg/obs.jsonl"));
        assert_eq!(c.paths.out.unwrap(), PathBuf::from("/abs"));
    }

    #[test]
    fn ranges_checked() {
        assert!(RunConfig::from_toml("[detector]\nnms_threshold = 1.5", Path::new(".")).is_err());
        assert!(RunConfig::from_toml("[recommender]\npolicy = \"pcw\"", Path::new(".")).is_ok());
        assert!(RunConfig::from_toml("[recommender]\npolicy = \"best\"", Path::new(".")).is_err());
    }
}
