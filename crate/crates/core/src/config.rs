//! TOML run configuration.
//!
//! The smoothing widths, background radius and colony area bounds depend on
//! the acquisition and must be given; all other values default to the fixed
//! constants of the method.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{AccError, Result};
use crate::imaging::DEFAULT_GAUSSIAN_EXTENT;
use crate::splitting::SegParams;
use crate::texture::ClaheParams;

/// Worker count: a fixed number or one per available core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    pub fn resolve(self) -> usize {
        match self {
            Threads::Count(n) => n,
            Threads::Auto => std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threads::Auto => f.write_str("auto"),
            Threads::Count(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for Threads {
    type Err = AccError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads::Count(n)),
            _ => Err(AccError::Config(format!(
                "threads must be a positive integer or \"auto\", got {s:?}"
            ))),
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => s.serialize_str("auto"),
            Threads::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(i64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) if n > 0 => Ok(Threads::Count(n as usize)),
            Raw::N(n) => Err(serde::de::Error::custom(format!("threads must be positive, got {n}"))),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Smoothing {
    /// Gaussian sigma `(x, y)` in pixels for the background-suppressed PC plane.
    pub pca: [f64; 2],
    /// Gaussian sigma `(x, y)` in pixels for the grayscale image.
    pub gray: [f64; 2],
    /// Kernel half-width in units of sigma.
    #[serde(default = "default_extent")]
    pub half_extent: f64,
}

fn default_extent() -> f64 {
    DEFAULT_GAUSSIAN_EXTENT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    /// Disk radius of the opening-closing by reconstruction.
    pub r_obrcbr: usize,
    /// Peak-over-median residual below which an image is considered empty.
    #[serde(default = "default_min_contrast")]
    pub min_contrast: f64,
}

fn default_min_contrast() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColonyArea {
    pub a_min: f64,
    pub a_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub h_min: f64,
    pub h_max: f64,
    pub h_step: f64,
    pub circ_edges: [f64; 4],
    pub a_thresh_factor: f64,
    pub circ_split: f64,
    pub max_recursion_depth: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        let s = SegParams::default();
        Self {
            h_min: s.h_min,
            h_max: s.h_max,
            h_step: s.h_step,
            circ_edges: s.circ_edges,
            a_thresh_factor: s.a_thresh_factor,
            circ_split: s.circ_split,
            max_recursion_depth: s.max_recursion_depth,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureSection {
    /// Gray levels of the co-occurrence matrices.
    pub levels: usize,
    pub clahe: ClaheParams,
}

impl Default for TextureSection {
    fn default() -> Self {
        Self {
            levels: 64,
            clahe: ClaheParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSection {
    pub dilation_radius: usize,
}

impl Default for BlobSection {
    fn default() -> Self {
        Self { dilation_radius: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_marks: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_masks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Image directory or glob pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Threads,
    pub smoothing: Smoothing,
    pub background: Background,
    pub colony: ColonyArea,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub texture: TextureSection,
    /// Adaptive equalization of the grayscale image (no clipping by default).
    #[serde(default = "default_enhance")]
    pub enhance: ClaheParams,
    #[serde(default)]
    pub blobs: BlobSection,
    #[serde(default)]
    pub evaluation: EvalSection,
}

fn default_enhance() -> ClaheParams {
    ClaheParams::unclipped(16, 16)
}

impl PipelineConfig {
    /// A configuration with the given acquisition-dependent values and
    /// defaults everywhere else.
    pub fn new(pca_sigma: f64, gray_sigma: f64, r_obrcbr: usize, a_min: f64, a_max: f64) -> Self {
        Self {
            input: None,
            output: None,
            threads: Threads::Auto,
            smoothing: Smoothing {
                pca: [pca_sigma; 2],
                gray: [gray_sigma; 2],
                half_extent: DEFAULT_GAUSSIAN_EXTENT,
            },
            background: Background {
                r_obrcbr,
                min_contrast: default_min_contrast(),
            },
            colony: ColonyArea { a_min, a_max },
            split: SplitSection::default(),
            texture: TextureSection::default(),
            enhance: default_enhance(),
            blobs: BlobSection::default(),
            evaluation: EvalSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| AccError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AccError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn seg_params(&self) -> SegParams {
        SegParams {
            h_min: self.split.h_min,
            h_max: self.split.h_max,
            h_step: self.split.h_step,
            a_min: self.colony.a_min,
            a_max: self.colony.a_max,
            circ_edges: self.split.circ_edges,
            a_thresh_factor: self.split.a_thresh_factor,
            circ_split: self.split.circ_split,
            max_recursion_depth: self.split.max_recursion_depth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: AccError| AccError::Config(e.to_string());
        for s in self.smoothing.pca.iter().chain(&self.smoothing.gray) {
            if !(*s > 0.0) {
                return Err(AccError::Config(format!("smoothing sigma must be positive, got {s}")));
            }
        }
        if !(self.smoothing.half_extent >= 1.0) {
            return Err(AccError::Config("smoothing half_extent must be at least 1".into()));
        }
        if self.background.r_obrcbr < 1 {
            return Err(AccError::Config("r_obrcbr must be at least 1".into()));
        }
        if self.texture.levels < 2 {
            return Err(AccError::Config("texture levels must be at least 2".into()));
        }
        self.seg_params().validate().map_err(cfg)?;
        self.texture.clahe.validate().map_err(cfg)?;
        self.enhance.validate().map_err(cfg)?;
        Ok(())
    }
}
