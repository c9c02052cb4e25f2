//! Pipeline parameters and their `key=value` text form.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{side_for_extent, HarrisParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    /// Side length S of every top-view image.
    pub image_size_m: f64,
    /// Raster resolution r.
    pub resolution_m_per_px: f64,
    /// Number K of keyframes accumulated per window.
    pub keyframe_window: usize,
    pub keyframe_distance_m: f64,
    pub keyframe_heading_deg: f64,
    /// Outer radius R^o of the consistent region and the sampling pattern.
    pub descriptor_outer_radius_m: f64,
    /// Radius R^i of the discrepant disk.
    pub discrepant_radius_m: f64,
    /// Summary-vector norm τ^s below which an intersection counts as symmetric.
    pub symmetry_threshold: f64,
    pub pattern_rings: u32,
    pub pattern_base_cells: u32,
    /// Largest Hamming distance τ^h accepted as a match.
    pub match_threshold: u32,
    pub harris: HarrisParams,
    /// Structuring-element radius; `None` means `ceil(1.5 m / r)`.
    pub morph_kernel_radius_px: Option<u32>,
    /// Skeleton spurs shorter than this are pruned after thinning.
    pub spur_prune_m: f64,
    /// Branches with fewer pixels are ignored.
    pub min_branch_px: usize,
    /// Largest distance between the vehicle and a detection that is still
    /// described; `None` means the largest value for which the sampling
    /// pattern is guaranteed to fit in the image.
    pub detection_gate_m: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            image_size_m: 120.0,
            resolution_m_per_px: 0.16,
            keyframe_window: 21,
            keyframe_distance_m: 5.0,
            keyframe_heading_deg: 10.0,
            descriptor_outer_radius_m: 40.0,
            discrepant_radius_m: 10.0,
            symmetry_threshold: 0.1,
            pattern_rings: 8,
            pattern_base_cells: 8,
            match_threshold: 50,
            harris: HarrisParams::default(),
            morph_kernel_radius_px: None,
            spur_prune_m: 5.0,
            min_branch_px: 8,
            detection_gate_m: None,
        }
    }
}

/// The parameters a database depends on. Queries must use the same values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub image_size_m: f64,
    pub resolution_m_per_px: f64,
    pub descriptor_outer_radius_m: f64,
    pub discrepant_radius_m: f64,
    pub pattern_rings: u32,
    pub pattern_base_cells: u32,
    pub symmetry_threshold: f64,
}

impl Fingerprint {
    /// Names the first differing field, if any.
    pub fn diff(&self, other: &Fingerprint) -> Option<String> {
        let pairs: [(&str, f64, f64); 7] = [
            ("image_size_m", self.image_size_m, other.image_size_m),
            ("resolution_m_per_px", self.resolution_m_per_px, other.resolution_m_per_px),
            (
                "descriptor_outer_radius_m",
                self.descriptor_outer_radius_m,
                other.descriptor_outer_radius_m,
            ),
            ("discrepant_radius_m", self.discrepant_radius_m, other.discrepant_radius_m),
            ("pattern_rings", self.pattern_rings as f64, other.pattern_rings as f64),
            (
                "pattern_base_cells",
                self.pattern_base_cells as f64,
                other.pattern_base_cells as f64,
            ),
            ("symmetry_threshold", self.symmetry_threshold, other.symmetry_threshold),
        ];
        pairs
            .iter()
            .find(|(_, a, b)| a.to_bits() != b.to_bits())
            .map(|(name, a, b)| format!("{name}: database has {a}, query config has {b}"))
    }
}

const KEYS: &[&str] = &[
    "image_size_m",
    "resolution_m_per_px",
    "keyframe_window",
    "keyframe_distance_m",
    "keyframe_heading_deg",
    "descriptor_outer_radius_m",
    "discrepant_radius_m",
    "symmetry_threshold",
    "pattern_rings",
    "pattern_base_cells",
    "match_threshold",
    "harris_window_px",
    "harris_k",
    "harris_threshold_rel",
    "morph_kernel_radius_px",
    "spur_prune_m",
    "min_branch_px",
    "detection_gate_m",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl Config {
    /// All recognized keys, in file order.
    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    /// Sets one parameter from its textual value. `auto` resets optional
    /// parameters to their derived default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "image_size_m" => self.image_size_m = parse_num(key, value)?,
            "resolution_m_per_px" => self.resolution_m_per_px = parse_num(key, value)?,
            "keyframe_window" => self.keyframe_window = parse_num(key, value)?,
            "keyframe_distance_m" => self.keyframe_distance_m = parse_num(key, value)?,
            "keyframe_heading_deg" => self.keyframe_heading_deg = parse_num(key, value)?,
            "descriptor_outer_radius_m" => self.descriptor_outer_radius_m = parse_num(key, value)?,
            "discrepant_radius_m" => self.discrepant_radius_m = parse_num(key, value)?,
            "symmetry_threshold" => self.symmetry_threshold = parse_num(key, value)?,
            "pattern_rings" => self.pattern_rings = parse_num(key, value)?,
            "pattern_base_cells" => self.pattern_base_cells = parse_num(key, value)?,
            "match_threshold" => self.match_threshold = parse_num(key, value)?,
            "harris_window_px" => self.harris.window_px = parse_num(key, value)?,
            "harris_k" => self.harris.k = parse_num(key, value)?,
            "harris_threshold_rel" => self.harris.threshold_rel = parse_num(key, value)?,
            "morph_kernel_radius_px" => {
                self.morph_kernel_radius_px = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            "spur_prune_m" => self.spur_prune_m = parse_num(key, value)?,
            "min_branch_px" => self.min_branch_px = parse_num(key, value)?,
            "detection_gate_m" => {
                self.detection_gate_m = if value == "auto" {
                    None
                } else {
                    Some(parse_num(key, value)?)
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses a `key=value` document on top of the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a `key=value` document without validating, so that later
    /// overrides can still repair it.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        let _ = writeln!(s, "image_size_m={}", self.image_size_m);
        let _ = writeln!(s, "resolution_m_per_px={}", self.resolution_m_per_px);
        let _ = writeln!(s, "keyframe_window={}", self.keyframe_window);
        let _ = writeln!(s, "keyframe_distance_m={}", self.keyframe_distance_m);
        let _ = writeln!(s, "keyframe_heading_deg={}", self.keyframe_heading_deg);
        let _ = writeln!(s, "descriptor_outer_radius_m={}", self.descriptor_outer_radius_m);
        let _ = writeln!(s, "discrepant_radius_m={}", self.discrepant_radius_m);
        let _ = writeln!(s, "symmetry_threshold={}", self.symmetry_threshold);
        let _ = writeln!(s, "pattern_rings={}", self.pattern_rings);
        let _ = writeln!(s, "pattern_base_cells={}", self.pattern_base_cells);
        let _ = writeln!(s, "match_threshold={}", self.match_threshold);
        let _ = writeln!(s, "harris_window_px={}", self.harris.window_px);
        let _ = writeln!(s, "harris_k={}", self.harris.k);
        let _ = writeln!(s, "harris_threshold_rel={}", self.harris.threshold_rel);
        let _ = writeln!(
            s,
            "morph_kernel_radius_px={}",
            opt(self.morph_kernel_radius_px.map(|v| v.to_string()))
        );
        let _ = writeln!(s, "spur_prune_m={}", self.spur_prune_m);
        let _ = writeln!(s, "min_branch_px={}", self.min_branch_px);
        let _ = writeln!(
            s,
            "detection_gate_m={}",
            opt(self.detection_gate_m.map(|v| v.to_string()))
        );
        s
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("image_size_m", self.image_size_m),
            ("resolution_m_per_px", self.resolution_m_per_px),
            ("descriptor_outer_radius_m", self.descriptor_outer_radius_m),
            ("discrepant_radius_m", self.discrepant_radius_m),
            ("keyframe_distance_m", self.keyframe_distance_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("keyframe_heading_deg", self.keyframe_heading_deg),
            ("symmetry_threshold", self.symmetry_threshold),
            ("spur_prune_m", self.spur_prune_m),
            ("harris_k", self.harris.k),
            ("harris_threshold_rel", self.harris.threshold_rel),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.keyframe_window == 0 {
            return Err(Error::Config("keyframe_window must be at least 1".into()));
        }
        if self.pattern_rings == 0 || self.pattern_base_cells == 0 {
            return Err(Error::Config(
                "pattern_rings and pattern_base_cells must be at least 1".into(),
            ));
        }
        if self.harris.window_px == 0 {
            return Err(Error::Config("harris_window_px must be at least 1".into()));
        }
        if self.morph_kernel_radius_px == Some(0) {
            return Err(Error::Config("morph_kernel_radius_px must be at least 1".into()));
        }
        if self.discrepant_radius_m >= self.descriptor_outer_radius_m {
            return Err(Error::Config(format!(
                "discrepant_radius_m ({}) must be smaller than descriptor_outer_radius_m ({})",
                self.discrepant_radius_m, self.descriptor_outer_radius_m
            )));
        }
        let need = 2.0 * (self.descriptor_outer_radius_m + self.discrepant_radius_m);
        if self.image_size_m < need {
            return Err(Error::Config(format!(
                "constraint image_size_m >= 2*(descriptor_outer_radius_m + discrepant_radius_m) \
                 violated: {} < {need}",
                self.image_size_m
            )));
        }
        if let Some(g) = self.detection_gate_m {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config(format!("detection_gate_m must be non-negative, got {g}")));
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            image_size_m: self.image_size_m,
            resolution_m_per_px: self.resolution_m_per_px,
            descriptor_outer_radius_m: self.descriptor_outer_radius_m,
            discrepant_radius_m: self.discrepant_radius_m,
            pattern_rings: self.pattern_rings,
            pattern_base_cells: self.pattern_base_cells,
            symmetry_threshold: self.symmetry_threshold,
        }
    }

    /// Image side M in pixels.
    pub fn side_px(&self) -> usize {
        side_for_extent(self.image_size_m, self.resolution_m_per_px)
    }

    pub fn kernel_radius_px(&self) -> u32 {
        self.morph_kernel_radius_px
            .unwrap_or_else(|| (1.5 / self.resolution_m_per_px).ceil().max(1.0) as u32)
    }

    pub fn spur_prune_px(&self) -> usize {
        (self.spur_prune_m / self.resolution_m_per_px).round() as usize
    }

    /// Descriptor length Q in bits.
    pub fn descriptor_bits(&self) -> usize {
        let nr = self.pattern_rings as usize;
        self.pattern_base_cells as usize * nr * (nr + 1) / 2
    }

    pub fn keyframe_heading_rad(&self) -> f64 {
        self.keyframe_heading_deg.to_radians()
    }

    /// Detection gate in meters. The automatic value keeps the pattern disk
    /// inside the image wherever the refined point lands in the discrepant
    /// disk, with one pixel of slack.
    pub fn detection_gate(&self) -> f64 {
        self.detection_gate_m.unwrap_or_else(|| {
            let m = self.side_px() as f64;
            let r = self.resolution_m_per_px;
            // distance from the center pixel to the nearest image border
            let half = (m - 1.0 - (m / 2.0).floor() + 0.5) * r;
            (half - self.descriptor_outer_radius_m - self.discrepant_radius_m - r).max(0.0)
        })
    }
}
