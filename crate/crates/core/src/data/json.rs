//! JSON ingestion of raw per-frame joint exports.
//!
//! Schema:
//!
//! ```json
//! {
//!   "fps": 75,
//!   "persons": [
//!     { "id": 0, "frames": [ [[x, y, z], ... 20 joints], ... ] }
//!   ]
//! }
//! ```
//!
//! Coordinates are millimetres. Every person must carry the same number of
//! frames, and every frame exactly 20 joints in raw export order.

use std::path::Path;

use ndarray::{Array4, Axis};
use serde::{Deserialize, Serialize};

use super::skeleton::{DEFAULT_RAW_MAPPING, NUM_RAW_JOINTS};
use super::MotionSample;
use crate::error::{Error, Result};

/// Native frame rate of raw exports.
pub const NATIVE_FPS: f64 = 75.0;

/// A loaded export before joint selection: `[persons, frames, 20, 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub fps: f64,
    pub data: Array4<f64>,
}

impl RawSample {
    /// Inverse of the default selection: dropped hand joints copy their wrist.
    pub fn from_selected(sample: &MotionSample) -> RawSample {
        let (p, t, _, _) = sample.data.dim();
        let mut data = Array4::zeros((p, t, NUM_RAW_JOINTS, 3));
        for (canon, &raw) in DEFAULT_RAW_MAPPING.iter().enumerate() {
            data.index_axis_mut(Axis(2), raw)
                .assign(&sample.data.index_axis(Axis(2), canon));
        }
        // RightHand <- RightWrist, LeftHand <- LeftWrist
        for (hand, wrist) in [(5, 4), (9, 8)] {
            let w = data.index_axis(Axis(2), wrist).to_owned();
            data.index_axis_mut(Axis(2), hand).assign(&w);
        }
        RawSample {
            fps: sample.fps,
            data,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SceneFile {
    fps: f64,
    persons: Vec<PersonTrack>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PersonTrack {
    id: serde_json::Value,
    frames: Vec<Vec<[f64; 3]>>,
}

pub fn load_scene_json(path: impl AsRef<Path>) -> Result<RawSample> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text).map_err(|e| match e {
        Error::Parse {
            line,
            column,
            message,
            ..
        } => Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message,
        },
        other => other,
    })
}

fn parse_scene(text: &str) -> Result<RawSample> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: Default::default(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.persons.is_empty() {
        return Err(Error::Structure("scene contains no persons".into()));
    }
    if !(file.fps.is_finite() && file.fps > 0.0) {
        return Err(Error::Structure(format!("invalid fps {}", file.fps)));
    }
    let frames = file.persons[0].frames.len();
    for (p, person) in file.persons.iter().enumerate() {
        if person.frames.len() != frames {
            return Err(Error::Structure(format!(
                "person {p} has {} frames, person 0 has {frames}",
                person.frames.len()
            )));
        }
        for (t, frame) in person.frames.iter().enumerate() {
            if frame.len() != NUM_RAW_JOINTS {
                return Err(Error::Structure(format!(
                    "person {p} frame {t} has {} joints, expected {NUM_RAW_JOINTS}",
                    frame.len()
                )));
            }
        }
    }
    if frames < 2 {
        return Err(Error::dim(format!(
            "scene must contain at least 2 frames, got {frames}"
        )));
    }
    let mut data = Array4::zeros((file.persons.len(), frames, NUM_RAW_JOINTS, 3));
    for (p, person) in file.persons.iter().enumerate() {
        for (t, frame) in person.frames.iter().enumerate() {
            for (j, xyz) in frame.iter().enumerate() {
                for c in 0..3 {
                    if !xyz[c].is_finite() {
                        return Err(Error::numeric(
                            format!("person {p} frame {t} joint {j}"),
                            "non-finite coordinate",
                        ));
                    }
                    data[[p, t, j, c]] = xyz[c];
                }
            }
        }
    }
    Ok(RawSample {
        fps: file.fps,
        data,
    })
}

/// Serialize a raw sample with the ingestion schema.
pub fn scene_json_string(raw: &RawSample) -> String {
    let (p, t, j, _) = raw.data.dim();
    let persons = (0..p)
        .map(|pi| PersonTrack {
            id: serde_json::Value::from(pi),
            frames: (0..t)
                .map(|ti| {
                    (0..j)
                        .map(|ji| {
                            [
                                raw.data[[pi, ti, ji, 0]],
                                raw.data[[pi, ti, ji, 1]],
                                raw.data[[pi, ti, ji, 2]],
                            ]
                        })
                        .collect()
                })
                .collect(),
        })
        .collect();
    serde_json::to_string(&SceneFile {
        fps: raw.fps,
        persons,
    })
    .expect("scene serialization cannot fail")
}
