//! Run configuration read from TOML, with defaults for every field.
//!
//! The config hash is the hex SHA-256 of the config's canonical JSON form
//! with the `paths` table left out, so moving a run directory does not
//! change it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::molgraph::{Element, GenParams};
use crate::networks::Geometry;
use crate::nn::AdamConfig;
use crate::render::{DatasetSpec, RenderStyle};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub ring_prob: f64,
    /// Probability that a single bond is drawn as wedge or hash; 0 disables
    /// stereo.
    pub stereo_prob: f64,
    /// Relative element frequencies; elements left out keep the generator
    /// default.
    pub element_weights: BTreeMap<Element, f64>,
    /// Minimum molecules containing each element, per split.
    pub quota: BTreeMap<Element, usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train: 2000,
            val: 200,
            test: 200,
            min_atoms: 3,
            max_atoms: 10,
            ring_prob: 0.25,
            stereo_prob: 0.0,
            element_weights: BTreeMap::new(),
            quota: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegConfig {
    pub hidden: usize,
    /// Optimizer steps of one image each.
    pub steps: usize,
    pub lr: f64,
}

impl Default for SegConfig {
    fn default() -> Self {
        SegConfig {
            hidden: 16,
            steps: 3000,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClsConfig {
    pub hidden: usize,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Leading training images whose candidates feed the classifiers.
    pub images: usize,
}

impl Default for ClsConfig {
    fn default() -> Self {
        ClsConfig {
            hidden: 16,
            steps: 300,
            batch: 64,
            lr: 1e-3,
            images: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub models: PathBuf,
    pub out: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            data: "data".into(),
            models: "models".into(),
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub bond_length: i32,
    /// `[rows, cols]`.
    pub canvas: [usize; 2],
    pub style_id: u8,
    /// Ink threshold applied to input images before recognition.
    pub threshold: f32,
    pub vocab: Vocabulary,
    pub data: DataConfig,
    pub seg: SegConfig,
    pub cls: ClsConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            bond_length: 24,
            canvas: [128, 128],
            style_id: 1,
            threshold: 0.5,
            vocab: Vocabulary::small(),
            data: DataConfig::default(),
            seg: SegConfig::default(),
            cls: ClsConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.vocab.validate()?;
        self.style()?;
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        if self.seg.hidden == 0 || self.cls.hidden == 0 || self.cls.batch == 0 {
            return Err(Error::Config("hidden widths and batch size must be positive".into()));
        }
        for lr in [self.seg.lr, self.cls.lr] {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("learning rate {lr} must be a non-negative number")));
            }
        }
        self.gen_params().validate()
    }

    pub fn style(&self) -> Result<RenderStyle> {
        RenderStyle::preset(self.style_id, self.bond_length)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Ok(Geometry::from_style(&self.style()?))
    }

    pub fn canvas(&self) -> (usize, usize) {
        (self.canvas[0], self.canvas[1])
    }

    pub fn adam(lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }

    pub fn gen_params(&self) -> GenParams {
        let mut p = GenParams::for_vocabulary(&self.vocab, self.bond_length, self.canvas());
        p.min_atoms = self.data.min_atoms;
        p.max_atoms = self.data.max_atoms;
        p.ring_prob = self.data.ring_prob;
        p.stereo_prob = if p.stereo_kinds.is_empty() { 0.0 } else { self.data.stereo_prob };
        for (e, w) in p.element_weights.iter_mut() {
            if let Some(&v) = self.data.element_weights.get(e) {
                *w = v;
            }
        }
        p
    }

    /// Dataset spec of split 0 (train), 1 (val) or 2 (test).
    pub fn dataset_spec(&self, split: u32) -> Result<DatasetSpec> {
        let n = match split {
            0 => self.data.train,
            1 => self.data.val,
            2 => self.data.test,
            _ => return Err(Error::Config(format!("unknown split {split}"))),
        };
        Ok(DatasetSpec {
            n,
            style: self.style()?,
            canvas: self.canvas(),
            vocab: self.vocab.clone(),
            gen: self.gen_params(),
            quota: self.data.quota.clone(),
            seed: self.seed,
            split,
        })
    }

    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("paths");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }

    pub fn split_dir(&self, split: u32) -> PathBuf {
        self.paths.data.join(SPLITS[split as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_toml("seed = 9\n[seg]\nsteps = 200\n[cls]\nsteps = 5\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.seg.steps, 200);
        assert_eq!(cfg.seg.hidden, 16);
        assert_eq!(cfg.cls.batch, 64);
        assert_eq!(cfg.cls.steps, 5);
        assert_eq!(cfg.vocab, Vocabulary::small());
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn hash_ignores_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.data = "/elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(RunConfig::from_toml("threshold = 1.5"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("style_id = 3\nbond_length = 16").is_err());
        assert!(RunConfig::from_toml("unknown = 1").is_err());
        assert!(RunConfig::from_toml("[data]\nelement_weights = { C = 1.0, N = 0.02 }").is_ok());
    }
}
