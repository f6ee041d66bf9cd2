//! Experiment configuration: structured text on disk, one digest per run.
//!
//! The digest is a SHA-256 over the canonical JSON rendering of the
//! config, so any field change (and nothing else) changes it. Gamma grid
//! entries are either literal values or the dimension-relative "1/n".

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::circuit::{Entangler, FeatureMapConfig, RotationAxis};
use crate::error::{Error, Result};

/// RBF width candidate: a literal, or 1/n resolved at the working
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Fixed(f64),
    OneOverN,
}

impl GammaSpec {
    pub fn resolve(&self, n: usize) -> f64 {
        match self {
            GammaSpec::Fixed(v) => *v,
            GammaSpec::OneOverN => 1.0 / n as f64,
        }
    }
}

impl std::fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GammaSpec::Fixed(v) => write!(f, "{v}"),
            GammaSpec::OneOverN => write!(f, "1/n"),
        }
    }
}

impl Serialize for GammaSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            GammaSpec::Fixed(v) => ser.serialize_f64(*v),
            GammaSpec::OneOverN => ser.serialize_str("1/n"),
        }
    }
}

impl<'de> Deserialize<'de> for GammaSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) => Ok(GammaSpec::Fixed(v)),
            Raw::Text(s) if s == "1/n" => Ok(GammaSpec::OneOverN),
            Raw::Text(s) => Err(D::Error::custom(format!(
                "gamma entry {s:?}: expected a number or \"1/n\""
            ))),
        }
    }
}

/// Hyperparameter grids searched by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub c: Vec<f64>,
    pub gamma: Vec<GammaSpec>,
    pub alpha: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            c: vec![0.1, 1.0, 10.0, 100.0],
            gamma: vec![
                GammaSpec::Fixed(0.01),
                GammaSpec::Fixed(0.1),
                GammaSpec::OneOverN,
                GammaSpec::Fixed(1.0),
                GammaSpec::Fixed(10.0),
            ],
            alpha: (0..10).map(|k| k as f64 / 9.0).collect(),
        }
    }
}

/// Feature-map shape independent of the qubit count; instantiated per
/// working dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapTemplate {
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_angle_scale")]
    pub angle_scale: f64,
    #[serde(default = "default_rotation_axis")]
    pub rotation_axis: RotationAxis,
    #[serde(default = "default_entangler")]
    pub entangler: Entangler,
}

fn default_block_size() -> usize {
    2
}
fn default_depth() -> usize {
    1
}
fn default_angle_scale() -> f64 {
    PI
}
fn default_rotation_axis() -> RotationAxis {
    RotationAxis::Ry
}
fn default_entangler() -> Entangler {
    Entangler::Cz
}

impl Default for FeatureMapTemplate {
    fn default() -> Self {
        FeatureMapTemplate {
            block_size: default_block_size(),
            depth: default_depth(),
            angle_scale: default_angle_scale(),
            rotation_axis: default_rotation_axis(),
            entangler: default_entangler(),
        }
    }
}

impl FeatureMapTemplate {
    pub fn at(&self, n: usize) -> FeatureMapConfig {
        FeatureMapConfig::new(n)
            .with_block_size(self.block_size)
            .with_depth(self.depth)
            .with_angle_scale(self.angle_scale)
            .with_rotation_axis(self.rotation_axis)
            .with_entangler(self.entangler)
    }
}

/// Everything a run needs; (config, seed) determines every output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data_path: PathBuf,
    /// One class pair, or None for all ten classes / the default task set.
    #[serde(default)]
    pub class_filter: Option<(usize, usize)>,
    #[serde(default = "default_samples_per_class")]
    pub samples_per_class: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    #[serde(default = "default_feature_dims")]
    pub feature_dims: Vec<usize>,
    #[serde(default)]
    pub feature_map: FeatureMapTemplate,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_tile_size")]
    pub tile_size: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub output_dir: PathBuf,
}

fn default_samples_per_class() -> usize {
    200
}
fn default_split_ratio() -> f64 {
    0.8
}
fn default_feature_dims() -> Vec<usize> {
    vec![2, 4, 8, 16, 32, 64, 128, 256]
}
fn default_cv_folds() -> usize {
    5
}
fn default_tile_size() -> usize {
    32
}
fn default_workers() -> usize {
    1
}

/// Hard ceiling on the working dimension: one qubit per flattened pixel.
pub const MAX_FEATURE_DIM: usize = 784;

impl ExperimentConfig {
    /// Desk-scale defaults rooted at the given data and output locations.
    pub fn desk_default(data_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            data_path: data_path.into(),
            class_filter: None,
            samples_per_class: default_samples_per_class(),
            seed: 0,
            split_ratio: default_split_ratio(),
            feature_dims: default_feature_dims(),
            feature_map: FeatureMapTemplate::default(),
            grids: Grids::default(),
            cv_folds: default_cv_folds(),
            tile_size: default_tile_size(),
            workers: default_workers(),
            output_dir: output_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.split_ratio.is_finite()
            || self.split_ratio <= 0.0
            || self.split_ratio >= 1.0
        {
            return Err(Error::invalid(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if self.feature_dims.is_empty() {
            return Err(Error::invalid("feature_dims must not be empty"));
        }
        if let Some(&bad) = self
            .feature_dims
            .iter()
            .find(|&&n| n == 0 || n > MAX_FEATURE_DIM)
        {
            return Err(Error::invalid(format!(
                "feature dimension {bad} outside 1..={MAX_FEATURE_DIM}"
            )));
        }
        if self.grids.c.is_empty() || self.grids.gamma.is_empty() || self.grids.alpha.is_empty()
        {
            return Err(Error::invalid("every hyperparameter grid must be non-empty"));
        }
        if self.grids.c.iter().any(|&c| !c.is_finite() || c <= 0.0) {
            return Err(Error::invalid("C grid entries must be positive"));
        }
        if self
            .grids
            .gamma
            .iter()
            .any(|g| matches!(g, GammaSpec::Fixed(v) if !v.is_finite() || *v <= 0.0))
        {
            return Err(Error::invalid("gamma grid entries must be positive"));
        }
        if self
            .grids
            .alpha
            .iter()
            .any(|&a| !a.is_finite() || !(0.0..=1.0).contains(&a))
        {
            return Err(Error::invalid("alpha grid entries must lie in [0, 1]"));
        }
        if let Some((p, q)) = self.class_filter {
            if p >= q || q > 9 {
                return Err(Error::invalid(format!(
                    "class filter ({p}, {q}) must satisfy p < q <= 9"
                )));
            }
        }
        if self.samples_per_class < 2 {
            return Err(Error::invalid("samples_per_class must be at least 2"));
        }
        if self.cv_folds < 2 {
            return Err(Error::invalid("cv_folds must be at least 2"));
        }
        if self.tile_size == 0 {
            return Err(Error::invalid("tile_size must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::invalid("workers must be positive"));
        }
        if self.feature_map.block_size == 0 || self.feature_map.depth == 0 {
            return Err(Error::invalid("feature map block_size and depth must be positive"));
        }
        if !self.feature_map.angle_scale.is_finite() {
            return Err(Error::invalid("feature map angle_scale must be finite"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::invalid(format!("config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    /// SHA-256 hex digest of the canonical JSON rendering.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_string(&hasher.finalize())
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        use std::fmt::Write as _;
        write!(s, "{b:02x}").expect("writing to a String cannot fail");
    }
    s
}

/// Deterministic sub-seed: hash the base seed with a purpose tag so
/// different stages never share a stream.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8-byte prefix"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_preserves_everything() {
        let mut cfg = ExperimentConfig::desk_default("data", "out");
        cfg.class_filter = Some((3, 7));
        cfg.seed = 99;
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn gamma_grid_mixes_numbers_and_one_over_n() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            data_path = "d"
            output_dir = "o"
            [grids]
            c = [1.0]
            gamma = [0.5, "1/n", 2.0]
            alpha = [0.0, 1.0]
            "#,
        )
        .unwrap();
        assert_eq!(
            cfg.grids.gamma,
            vec![
                GammaSpec::Fixed(0.5),
                GammaSpec::OneOverN,
                GammaSpec::Fixed(2.0)
            ]
        );
        assert_eq!(cfg.grids.gamma[1].resolve(64), 1.0 / 64.0);
        assert!(ExperimentConfig::from_toml(
            r#"
            data_path = "d"
            output_dir = "o"
            [grids]
            c = [1.0]
            gamma = ["2/n"]
            alpha = [0.5]
            "#,
        )
        .is_err());
    }

    #[test]
    fn defaults_match_the_desk_plan() {
        let cfg = ExperimentConfig::from_toml("data_path = \"d\"\noutput_dir = \"o\"").unwrap();
        assert_eq!(cfg.samples_per_class, 200);
        assert_eq!(cfg.split_ratio, 0.8);
        assert_eq!(cfg.cv_folds, 5);
        assert_eq!(cfg.feature_dims, vec![2, 4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(cfg.grids.c, vec![0.1, 1.0, 10.0, 100.0]);
        assert_eq!(cfg.grids.alpha.len(), 10);
        // The alpha grid must contain 7/9 = 0.777...
        assert!(cfg
            .grids
            .alpha
            .iter()
            .any(|&a| (a - 7.0 / 9.0).abs() < 1e-15));
        assert_eq!(cfg.feature_map.block_size, 2);
        assert_eq!(cfg.feature_map.rotation_axis, RotationAxis::Ry);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ExperimentConfig::desk_default("d", "o");
        for mutate in [
            |c: &mut ExperimentConfig| c.split_ratio = 1.0,
            |c: &mut ExperimentConfig| c.feature_dims = vec![785],
            |c: &mut ExperimentConfig| c.feature_dims.clear(),
            |c: &mut ExperimentConfig| c.grids.c.clear(),
            |c: &mut ExperimentConfig| c.grids.alpha = vec![1.5],
            |c: &mut ExperimentConfig| c.grids.gamma = vec![GammaSpec::Fixed(-1.0)],
            |c: &mut ExperimentConfig| c.class_filter = Some((7, 3)),
            |c: &mut ExperimentConfig| c.class_filter = Some((3, 10)),
            |c: &mut ExperimentConfig| c.cv_folds = 1,
            |c: &mut ExperimentConfig| c.workers = 0,
        ] {
            let mut cfg = base.clone();
            mutate(&mut cfg);
            assert!(cfg.validate().is_err());
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn digest_tracks_content_not_identity() {
        let a = ExperimentConfig::desk_default("d", "o");
        let b = ExperimentConfig::desk_default("d", "o");
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.digest(), c.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn derived_seeds_differ_by_tag_and_base() {
        assert_eq!(derive_seed(5, "split"), derive_seed(5, "split"));
        assert_ne!(derive_seed(5, "split"), derive_seed(5, "cv"));
        assert_ne!(derive_seed(5, "split"), derive_seed(6, "split"));
    }
}
