use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{MotionSample, Scene};

/// Share of each non-crowd scene used for training.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Seed of the shuffle that decides the 80/20 cut.
pub const SPLIT_SEED: u64 = 0x4d49_4d4f;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<MotionSample>,
    pub test: Vec<MotionSample>,
    pub rule: String,
}

/// Per-scene 80/20 split; `ComplexCrowd` samples always go to test.
///
/// Within a scene, ids are sorted and then shuffled with [`SPLIT_SEED`], so
/// the result does not depend on input order.
pub fn split_dataset(samples: &[MotionSample]) -> DatasetSplit {
    let mut by_scene: BTreeMap<Scene, Vec<&MotionSample>> = BTreeMap::new();
    for s in samples {
        by_scene.entry(s.scene).or_default().push(s);
    }
    let mut split = DatasetSplit {
        rule: format!(
            "per-scene {:.0}/{:.0} by sorted id, shuffle seed {SPLIT_SEED:#x}; ComplexCrowd all test",
            TRAIN_FRACTION * 100.0,
            (1.0 - TRAIN_FRACTION) * 100.0
        ),
        ..Default::default()
    };
    for (scene, mut group) in by_scene {
        group.sort_by(|a, b| a.id.cmp(&b.id));
        if scene == Scene::ComplexCrowd {
            split.test.extend(group.into_iter().cloned());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(SPLIT_SEED ^ scene as u64);
        group.shuffle(&mut rng);
        let n_train = (group.len() as f64 * TRAIN_FRACTION).round() as usize;
        let (train, test) = group.split_at(n_train);
        let mut train: Vec<_> = train.iter().map(|s| (*s).clone()).collect();
        let mut test: Vec<_> = test.iter().map(|s| (*s).clone()).collect();
        train.sort_by(|a, b| a.id.cmp(&b.id));
        test.sort_by(|a, b| a.id.cmp(&b.id));
        split.train.extend(train);
        split.test.extend(test);
    }
    split
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_id;
    use ndarray::Array4;

    fn samples(scene: Scene, n: usize) -> Vec<MotionSample> {
        (0..n)
            .map(|i| {
                MotionSample::new(
                    sample_id(scene, i),
                    scene,
                    25.0,
                    Array4::from_elem((1, 2, 18, 3), i as f64),
                )
                .unwrap()
            })
            .collect()
    }

    #[test]
    fn ten_park_samples_split_8_2() {
        let split = split_dataset(&samples(Scene::Park, 10));
        assert_eq!(split.train.len(), 8);
        assert_eq!(split.test.len(), 2);
    }

    #[test]
    fn crowd_is_all_test() {
        let split = split_dataset(&samples(Scene::ComplexCrowd, 5));
        assert!(split.train.is_empty());
        assert_eq!(split.test.len(), 5);
    }

    #[test]
    fn empty_input() {
        let split = split_dataset(&[]);
        assert!(split.train.is_empty() && split.test.is_empty());
    }

    #[test]
    fn order_independent_and_disjoint() {
        let mut all = samples(Scene::Park, 7);
        all.extend(samples(Scene::Indoor, 12));
        all.extend(samples(Scene::ComplexCrowd, 3));
        let a = split_dataset(&all);
        all.reverse();
        all.swap(2, 9);
        let b = split_dataset(&all);
        assert_eq!(a, b);
        for s in &a.train {
            assert!(a.test.iter().all(|t| t.id != s.id));
            assert_ne!(s.scene, Scene::ComplexCrowd);
        }
        assert_eq!(a.train.len() + a.test.len(), 22);
    }
}
