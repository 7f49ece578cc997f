//! Dataset manifest: a TOML file listing every sample file, its scene and
//! split membership.
//!
//! ```toml
//! version = 1
//!
//! [[samples]]
//! id = "park_0000"
//! scene = "Park"
//! file = "park_0000.npy"
//! split = "train"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_npy, DatasetSplit, MotionSample, Scene};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub scene: Scene,
    pub file: String,
    pub split: SplitTag,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    #[serde(default)]
    pub samples: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn from_split(split: &DatasetSplit) -> Manifest {
        let entry = |s: &MotionSample, tag| ManifestEntry {
            id: s.id.clone(),
            scene: s.scene,
            file: super::sample_file_name(&s.id),
            split: tag,
            fps: s.fps,
        };
        let mut samples: Vec<ManifestEntry> = split
            .train
            .iter()
            .map(|s| entry(s, SplitTag::Train))
            .chain(split.test.iter().map(|s| entry(s, SplitTag::Test)))
            .collect();
        samples.sort_by(|a, b| a.id.cmp(&b.id));
        Manifest {
            version: MANIFEST_VERSION,
            samples,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialization cannot fail")
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "manifest version {} not supported (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }
        Ok(manifest)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    /// Load every sample tagged `tag`, resolving files against `root`.
    pub fn load_samples(&self, root: &Path, tag: SplitTag) -> Result<Vec<MotionSample>> {
        self.samples
            .iter()
            .filter(|e| e.split == tag)
            .map(|e| {
                let path: PathBuf = root.join(&e.file);
                let data = read_npy(&path)?;
                MotionSample::new(e.id.clone(), e.scene, e.fps, data).map_err(|err| {
                    Error::Format(format!("{}: {err}", path.display()))
                })
            })
            .collect()
    }
}
