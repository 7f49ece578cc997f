use ndarray::{s, Array4};

use super::{MotionSample, Scene};
use crate::error::{Error, Result};

/// Observed frames per window.
pub const INPUT_FRAMES: usize = 25;

/// One supervised example cut from a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    /// `[persons, in_len, joints, 3]`
    pub input: Array4<f64>,
    /// `[persons, out_len, joints, 3]`, the frames right after `input`.
    pub target: Array4<f64>,
    pub scene: Scene,
    pub source_id: String,
    pub start: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Windowing {
    pub windows: Vec<TrainingWindow>,
    /// Samples too short to yield any window.
    pub skipped: usize,
}

/// Slide a `in_len + out_len` window over each sample at `stride`.
pub fn window_samples(
    samples: &[MotionSample],
    in_len: usize,
    out_len: usize,
    stride: usize,
) -> Result<Windowing> {
    if in_len < 2 || out_len == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "invalid windowing in_len={in_len} out_len={out_len} stride={stride}"
        )));
    }
    let span = in_len + out_len;
    let mut out = Windowing::default();
    for sample in samples {
        let frames = sample.frames();
        if frames < span {
            out.skipped += 1;
            continue;
        }
        for start in (0..=frames - span).step_by(stride) {
            out.windows.push(TrainingWindow {
                input: sample
                    .data
                    .slice(s![.., start..start + in_len, .., ..])
                    .to_owned(),
                target: sample
                    .data
                    .slice(s![.., start + in_len..start + span, .., ..])
                    .to_owned(),
                scene: sample.scene,
                source_id: sample.id.clone(),
                start,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::skeleton::NUM_JOINTS;

    fn sample(frames: usize) -> MotionSample {
        let data = Array4::from_shape_fn((3, frames, NUM_JOINTS, 3), |(p, t, j, c)| {
            (p * 100_000 + t * 100 + j * 3 + c) as f64
        });
        MotionSample::new("street_0001", Scene::Street, 25.0, data).unwrap()
    }

    #[test]
    fn one_window_from_75_frames() {
        let w = window_samples(&[sample(75)], 25, 50, 75).unwrap();
        assert_eq!(w.windows.len(), 1);
        assert_eq!(w.skipped, 0);
        assert_eq!(w.windows[0].target.shape()[1], 50);
    }

    #[test]
    fn too_short_is_skipped() {
        let w = window_samples(&[sample(74)], 25, 50, 75).unwrap();
        assert!(w.windows.is_empty());
        assert_eq!(w.skipped, 1);
    }

    #[test]
    fn starts_enumerate_valid_offsets() {
        let w = window_samples(&[sample(100)], 25, 25, 25).unwrap();
        let expected: Vec<usize> = (0..=100 - 50).step_by(25).collect();
        let starts: Vec<usize> = w.windows.iter().map(|w| w.start).collect();
        assert_eq!(starts, expected);
        assert_eq!(starts, vec![0, 25, 50]);
    }

    #[test]
    fn windows_are_contiguous_in_source() {
        let s = sample(90);
        let w = window_samples(std::slice::from_ref(&s), 25, 25, 7).unwrap();
        for win in &w.windows {
            for t in 0..25 {
                assert_eq!(win.input[[1, t, 4, 2]], s.data[[1, win.start + t, 4, 2]]);
                assert_eq!(win.target[[2, t, 0, 0]], s.data[[2, win.start + 25 + t, 0, 0]]);
            }
        }
    }
}
