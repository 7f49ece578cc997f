//! Motion data model, file formats and preprocessing.

mod json;
mod manifest;
mod npy;
mod pipeline;
pub mod skeleton;
mod split;
mod window;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array4, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use json::{load_scene_json, scene_json_string, RawSample, NATIVE_FPS};
pub use manifest::{Manifest, ManifestEntry, SplitTag, MANIFEST_VERSION};
pub use npy::{read_npy, write_npy};
pub use pipeline::{
    downsample, reconstruct, select_joints, select_joints_with, to_displacements,
    DisplacementSequence, DEFAULT_DOWNSAMPLE,
};
pub use skeleton::Skeleton;
pub use split::{split_dataset, DatasetSplit, SPLIT_SEED, TRAIN_FRACTION};
pub use window::{window_samples, TrainingWindow, Windowing, INPUT_FRAMES};

/// Scene category of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scene {
    Park,
    Street,
    Indoor,
    SpecialLocations,
    ComplexCrowd,
    Synthetic,
}

impl Scene {
    pub const ALL: [Scene; 6] = [
        Scene::Park,
        Scene::Street,
        Scene::Indoor,
        Scene::SpecialLocations,
        Scene::ComplexCrowd,
        Scene::Synthetic,
    ];

    /// Lower-case file-name prefix.
    pub fn slug(self) -> &'static str {
        match self {
            Scene::Park => "park",
            Scene::Street => "street",
            Scene::Indoor => "indoor",
            Scene::SpecialLocations => "special_locations",
            Scene::ComplexCrowd => "complex_crowd",
            Scene::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scene::Park => "Park",
            Scene::Street => "Street",
            Scene::Indoor => "Indoor",
            Scene::SpecialLocations => "SpecialLocations",
            Scene::ComplexCrowd => "ComplexCrowd",
            Scene::Synthetic => "Synthetic",
        };
        f.write_str(name)
    }
}

impl FromStr for Scene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scene::ALL
            .into_iter()
            .find(|scene| scene.to_string() == s || scene.slug() == s)
            .ok_or_else(|| Error::Format(format!("unknown scene label {s:?}")))
    }
}

/// Joint positions of every person in one scene, in millimetres.
///
/// `data` is laid out `[persons, frames, joints, xyz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSample {
    pub id: String,
    pub scene: Scene,
    pub fps: f64,
    pub data: Array4<f64>,
}

impl MotionSample {
    pub fn new(id: impl Into<String>, scene: Scene, fps: f64, data: Array4<f64>) -> Result<Self> {
        let sample = MotionSample {
            id: id.into(),
            scene,
            fps,
            data,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn persons(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn joints(&self) -> usize {
        self.data.shape()[2]
    }

    /// Pose of all persons at one frame, `[persons, joints, 3]`.
    pub fn frame(&self, t: usize) -> ArrayView3<'_, f64> {
        self.data.index_axis(Axis(1), t)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.data.shape();
        if shape[0] < 1 {
            return Err(Error::dim("sample must contain at least one person"));
        }
        if shape[1] < 2 {
            return Err(Error::dim(format!(
                "sample must contain at least 2 frames, got {}",
                shape[1]
            )));
        }
        if shape[2] != skeleton::NUM_JOINTS {
            return Err(Error::dim(format!(
                "sample must have {} joints, got {}",
                skeleton::NUM_JOINTS,
                shape[2]
            )));
        }
        if shape[3] != 3 {
            return Err(Error::dim("coordinate axis must have length 3"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Structure(format!("fps must be positive, got {}", self.fps)));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(
                format!("sample {}", self.id),
                "non-finite coordinate",
            ));
        }
        Ok(())
    }
}

/// Conventional file name `<scene>_<index>.npy`.
pub fn sample_file_name(id: &str) -> String {
    format!("{id}.npy")
}

/// Conventional sample id `<scene>_<index>`.
pub fn sample_id(scene: Scene, index: usize) -> String {
    format!("{}_{index:04}", scene.slug())
}
