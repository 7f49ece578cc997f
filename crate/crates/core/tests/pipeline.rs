use std::collections::BTreeSet;

use mfk_core::data::skeleton::{BONES, NUM_JOINTS};
use mfk_core::data::{
    downsample, load_scene_json, read_npy, reconstruct, scene_json_string, select_joints,
    split_dataset, to_displacements, window_samples, write_npy, Manifest, MotionSample, RawSample,
    Scene, SplitTag, DEFAULT_DOWNSAMPLE, INPUT_FRAMES,
};
use mfk_core::synth::{dataset_configs, generate_dataset, generate_scene, SynthConfig};
use mfk_core::Error;
use ndarray::{s, Axis};

fn dataset(samples: usize, frames: usize, seed: u64) -> Vec<MotionSample> {
    let base = SynthConfig {
        frames,
        ..Default::default()
    };
    generate_dataset(&dataset_configs(&base, samples, 5), seed).unwrap()
}

fn bone_length(s: &MotionSample, p: usize, t: usize, b: (usize, usize)) -> f64 {
    let d = &s.data.slice(s![p, t, b.0, ..]) - &s.data.slice(s![p, t, b.1, ..]);
    d.dot(&d).sqrt()
}

#[test]
fn raw_export_to_processed_files() {
    let dir = tempfile::tempdir().unwrap();
    let source = generate_scene(&SynthConfig {
        frames: 30,
        ..Default::default()
    })
    .unwrap();
    let mut native = source.clone();
    native.fps = 75.0;
    let json = dir.path().join("park_walk.json");
    std::fs::write(&json, scene_json_string(&RawSample::from_selected(&native))).unwrap();

    let raw = load_scene_json(&json).unwrap();
    assert_eq!(raw.data.shape(), &[3, 30, 20, 3]);
    let selected = select_joints("park_0000", Scene::Park, &raw).unwrap();
    assert_eq!(selected.data, source.data);
    let reduced = downsample(&selected, DEFAULT_DOWNSAMPLE).unwrap();
    assert_eq!(reduced.frames(), 10);
    assert_eq!(reduced.fps, 25.0);
    assert_eq!(
        reduced.data.index_axis(Axis(1), 1),
        source.data.index_axis(Axis(1), 3)
    );

    let npy = dir.path().join("park_0000.npy");
    write_npy(&npy, &reduced.data).unwrap();
    assert_eq!(read_npy(&npy).unwrap(), reduced.data);
}

#[test]
fn manifest_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dataset(12, 40, 3);
    let split = split_dataset(&samples);
    for s in split.train.iter().chain(&split.test) {
        write_npy(dir.path().join(mfk_core::data::sample_file_name(&s.id)), &s.data).unwrap();
    }
    let manifest = Manifest::from_split(&split);
    manifest.save(dir.path().join("manifest.toml")).unwrap();
    let back = Manifest::load(dir.path().join("manifest.toml")).unwrap();
    assert_eq!(back, manifest);
    let by_id = |mut v: Vec<MotionSample>| {
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    };
    let train = back.load_samples(dir.path(), SplitTag::Train).unwrap();
    let test = back.load_samples(dir.path(), SplitTag::Test).unwrap();
    assert_eq!(by_id(train), by_id(split.train.clone()));
    assert_eq!(by_id(test), by_id(split.test.clone()));
}

#[test]
fn missing_sample_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let split = split_dataset(&dataset(6, 30, 1));
    let manifest = Manifest::from_split(&split);
    let err = manifest
        .load_samples(dir.path(), SplitTag::Train)
        .unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}

#[test]
fn synthetic_dataset_is_reproducible() {
    assert_eq!(dataset(8, 50, 11), dataset(8, 50, 11));
    assert_ne!(dataset(8, 50, 11), dataset(8, 50, 12));
}

#[test]
fn synthetic_bones_keep_their_length() {
    for s in dataset(6, 60, 2) {
        for p in 0..s.persons() {
            for &b in BONES.iter() {
                let first = bone_length(&s, p, 0, b);
                for t in 1..s.frames() {
                    assert!((bone_length(&s, p, t, b) - first).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn synthetic_people_keep_their_distance() {
    let cfg = SynthConfig {
        persons: 6,
        frames: 120,
        ..Default::default()
    };
    let s = generate_scene(&cfg).unwrap();
    for t in 0..s.frames() {
        for a in 0..6 {
            for b in a + 1..6 {
                let dx = s.data[[a, t, 8, 0]] - s.data[[b, t, 8, 0]];
                let dy = s.data[[a, t, 8, 1]] - s.data[[b, t, 8, 1]];
                assert!(dx.hypot(dy) >= cfg.min_separation - 1e-9);
            }
        }
    }
}

#[test]
fn split_is_disjoint_and_order_independent() {
    let samples = dataset(30, 30, 5);
    let split = split_dataset(&samples);
    let train: BTreeSet<_> = split.train.iter().map(|s| s.id.clone()).collect();
    let test: BTreeSet<_> = split.test.iter().map(|s| s.id.clone()).collect();
    assert!(train.is_disjoint(&test));
    assert_eq!(train.len() + test.len(), 30);
    assert!(split.train.iter().all(|s| s.scene != Scene::ComplexCrowd));

    let mut reversed = samples.clone();
    reversed.reverse();
    assert_eq!(split_dataset(&reversed), split);
}

#[test]
fn windows_reassemble_the_sample() {
    let samples = dataset(2, 80, 9);
    let w = window_samples(&samples, INPUT_FRAMES, 25, 5).unwrap();
    assert_eq!(w.skipped, 0);
    assert_eq!(w.windows.len(), 2 * ((80 - 50) / 5 + 1));
    for win in &w.windows {
        let src = samples.iter().find(|s| s.id == win.source_id).unwrap();
        assert_eq!(
            win.input,
            src.data.slice(s![.., win.start..win.start + 25, .., ..])
        );
        assert_eq!(
            win.target,
            src.data.slice(s![.., win.start + 25..win.start + 50, .., ..])
        );
    }
    let short = window_samples(&dataset(2, 40, 9), INPUT_FRAMES, 25, 5).unwrap();
    assert!(short.windows.is_empty());
    assert_eq!(short.skipped, 2);
}

#[test]
fn displacements_reconstruct_the_future() {
    let s = &dataset(1, 50, 4)[0];
    let d = to_displacements(s.data.view()).unwrap();
    let first = s.data.index_axis(Axis(1), 0);
    let rebuilt = reconstruct(first, d.data.view()).unwrap();
    let want = s.data.slice(s![.., 1.., .., ..]);
    for (a, b) in rebuilt.iter().zip(want.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert_eq!(d.anchor, s.data.index_axis(Axis(1), 49));
    assert_eq!(s.joints(), NUM_JOINTS);
}
