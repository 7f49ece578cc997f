use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ndarray::{s, Array4, ArrayView4};

use mfk_core::data::{
    downsample, load_scene_json, read_npy, select_joints, split_dataset, write_npy, DatasetSplit,
    Manifest, MotionSample, Scene, SplitTag,
};
use mfk_core::metrics::{
    baseline_constant_velocity, baseline_zero_velocity, evaluate_scene, MetricReport,
};
use mfk_core::model::{load_checkpoint, save_checkpoint, SocialTgcn};
use mfk_core::synth::{dataset_configs, generate_dataset};
use mfk_core::training::train_with;

use crate::config::{usage, RunConfig};
use crate::runlog::{write_file, RunLog};

const MANIFEST_FILE: &str = "manifest.toml";
const CHECKPOINT_FILE: &str = "model.ckpt";
const HISTORY_FILE: &str = "history.jsonl";

fn write_dataset(root: &Path, split: &DatasetSplit, log: &mut RunLog) -> anyhow::Result<()> {
    std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
    for s in split.train.iter().chain(&split.test) {
        write_npy(root.join(mfk_core::data::sample_file_name(&s.id)), &s.data)?;
    }
    let manifest = Manifest::from_split(split);
    manifest.save(root.join(MANIFEST_FILE))?;
    log.line(&format!(
        "wrote {} train + {} test samples to {} ({})",
        split.train.len(),
        split.test.len(),
        root.display(),
        split.rule
    ));
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> anyhow::Result<()> {
    let mut log = RunLog::start(cfg, "synth")?;
    let s = &cfg.synth;
    let base = cfg.synth_base();
    base.validate()?;
    let samples = if s.samples == 0 {
        Vec::new()
    } else {
        generate_dataset(&dataset_configs(&base, s.samples, s.max_persons), cfg.run.seed)?
    };
    write_dataset(&cfg.data.root, &split_dataset(&samples), &mut log)
}

fn scene_of(stem: &str) -> Option<Scene> {
    let mut scenes = Scene::ALL.to_vec();
    scenes.sort_by_key(|s| std::cmp::Reverse(s.slug().len()));
    scenes.into_iter().find(|s| stem.starts_with(s.slug()))
}

pub fn preprocess(cfg: &RunConfig) -> anyhow::Result<()> {
    let mut log = RunLog::start(cfg, "preprocess")?;
    let raw = &cfg.data.raw;
    let entries = std::fs::read_dir(raw)
        .map_err(|e| usage(format!("cannot read raw directory {}: {e}", raw.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut samples = Vec::with_capacity(files.len());
    for path in &files {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let scene = scene_of(&stem).ok_or_else(|| {
            usage(format!(
                "{}: file name must start with a scene slug (park, street, indoor, special_locations, complex_crowd, synthetic)",
                path.display()
            ))
        })?;
        let raw = load_scene_json(path)?;
        let selected = select_joints(&stem, scene, &raw)?;
        samples.push(downsample(&selected, cfg.data.downsample)?);
    }
    log.line(&format!("loaded {} raw files from {}", samples.len(), raw.display()));
    write_dataset(&cfg.data.root, &split_dataset(&samples), &mut log)
}

fn load_split(cfg: &RunConfig, tag: SplitTag) -> anyhow::Result<Vec<MotionSample>> {
    let path = cfg.data.root.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(usage(format!("manifest not found at {}", path.display())));
    }
    let manifest = Manifest::load(&path)?;
    Ok(manifest.load_samples(&cfg.data.root, tag)?)
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let mut log = RunLog::start(cfg, "train")?;
    let samples = load_split(cfg, SplitTag::Train)?;
    let m = &cfg.model;
    let cut = mfk_core::data::window_samples(&samples, m.in_frames, m.out_frames, cfg.train.window_stride)?;
    if cut.windows.is_empty() {
        bail!(
            "no training windows: {} samples, {} too short for {} frames",
            samples.len(),
            cut.skipped,
            m.in_frames + m.out_frames
        );
    }
    let mut model = SocialTgcn::build(m.clone(), cfg.run.seed)?;
    log.line(&format!(
        "{} windows from {} samples, {} parameters",
        cut.windows.len(),
        samples.len(),
        model.param_count()
    ));
    let history_path = cfg.run.out_dir.join(HISTORY_FILE);
    let mut history = String::new();
    let result = train_with(&mut model, &cut.windows, &cfg.train_config(), |r| {
        history.push_str(&serde_json::to_string(r).expect("record serialises"));
        history.push('\n');
        log.line(&format!(
            "epoch {} rec {:.4} pose {:.4} joint {:.4} ({:.1}s, {} steps)",
            r.epoch, r.rec, r.pose, r.joint, r.seconds, r.steps
        ));
    });
    write_file(&history_path, &history)?;
    result?;
    let ckpt = cfg.run.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&model, &ckpt)?;
    log.line(&format!("saved {}", ckpt.display()));
    Ok(())
}

fn checkpoint_model(path: &Path) -> anyhow::Result<SocialTgcn> {
    if !path.is_file() {
        return Err(usage(format!("checkpoint not found at {}", path.display())));
    }
    Ok(load_checkpoint(path)?)
}

fn autoregressive(model: &SocialTgcn, obs: ArrayView4<'_, f64>, frames: usize) -> mfk_core::Result<Array4<f64>> {
    let steps = frames.div_ceil(model.config.out_frames);
    model.predict_autoregressive(obs, steps)
}

pub fn eval(cfg: &RunConfig, checkpoint: &Path) -> anyhow::Result<()> {
    let mut log = RunLog::start(cfg, "eval")?;
    let model = checkpoint_model(checkpoint)?;
    let samples = load_split(cfg, SplitTag::Test)?;
    if let Some(s) = samples.iter().find(|s| s.joints() != model.config.joints) {
        return Err(mfk_core::Error::Compatibility(format!(
            "checkpoint expects {} joints, sample {} has {}",
            model.config.joints,
            s.id,
            s.joints()
        ))
        .into());
    }
    let settings = cfg.eval_settings(&model.config);
    settings.validate()?;
    let out = settings.out_frames();
    let mut by_scene: BTreeMap<Scene, Vec<MotionSample>> = BTreeMap::new();
    for s in samples {
        by_scene.entry(s.scene).or_default().push(s);
    }
    let id = checkpoint
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "model".into());
    let ours = |obs: ArrayView4<'_, f64>| autoregressive(&model, obs, out);
    let zero = |obs: ArrayView4<'_, f64>| baseline_zero_velocity(obs, out);
    let constant = |obs: ArrayView4<'_, f64>| baseline_constant_velocity(obs, out);
    type Pred<'a> = &'a (dyn Fn(ArrayView4<'_, f64>) -> mfk_core::Result<Array4<f64>> + Sync);
    let predictors: [(String, Pred<'_>); 3] = [
        (id, &ours),
        ("zero_velocity".into(), &zero),
        ("constant_velocity".into(), &constant),
    ];
    for (name, predictor) in predictors {
        let mut report = MetricReport::new(&name, "test", cfg.run.seed, &settings.schedule);
        for (scene, group) in &by_scene {
            let label = scene.slug();
            match evaluate_scene(label, group, &settings, predictor) {
                Ok(m) => report.scenes.push(m),
                Err(mfk_core::Error::Domain(msg)) => log.line(&format!("skipping {label}: {msg}")),
                Err(e) => return Err(e.into()),
            }
        }
        if report.scenes.is_empty() {
            bail!("no test scene has a window of {} frames", settings.in_frames + out);
        }
        report.validate()?;
        let json = cfg.run.out_dir.join(format!("{name}.json"));
        let csv = cfg.run.out_dir.join(format!("{name}.csv"));
        write_file(&json, report.to_json())?;
        write_file(&csv, report.to_csv())?;
        log.line(&format!("wrote {} and {}", json.display(), csv.display()));
    }
    Ok(())
}

pub fn predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    input: &Path,
    output: &Path,
    steps: usize,
) -> anyhow::Result<()> {
    let mut log = RunLog::start(cfg, "predict")?;
    if steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let model = checkpoint_model(checkpoint)?;
    let motion = read_npy(input)?;
    let (_, frames, joints, _) = motion.dim();
    let need = model.config.in_frames;
    if frames < need {
        return Err(usage(format!(
            "{} has {frames} frames, the model needs at least {need}",
            input.display()
        )));
    }
    if joints != model.config.joints {
        return Err(mfk_core::Error::Compatibility(format!(
            "{} has {joints} joints, checkpoint expects {}",
            input.display(),
            model.config.joints
        ))
        .into());
    }
    let observed = motion.slice(s![.., frames - need.., .., ..]);
    let pred = model.predict_autoregressive(observed, steps)?;
    write_npy(output, &pred)?;
    log.line(&format!("wrote {:?} prediction to {}", pred.shape(), output.display()));
    Ok(())
}

const METRICS: [&str; 3] = ["gjpe", "ajpe", "rfde"];

fn fmt_mean(values: &[f64]) -> String {
    if values.is_empty() {
        String::new()
    } else {
        format!("{}", values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// `metric,time_ms,model,<scene...>,Average`: one row per model for every
/// metric and scheduled time.
pub fn comparison_table(reports: &[MetricReport]) -> String {
    let mut scenes: Vec<String> = Vec::new();
    for r in reports {
        for s in &r.scenes {
            if !scenes.contains(&s.scene) {
                scenes.push(s.scene.clone());
            }
        }
    }
    let mut times: Vec<u32> = Vec::new();
    for r in reports {
        for &t in &r.schedule_ms {
            if !times.contains(&t) {
                times.push(t);
            }
        }
    }
    let mut out = format!("metric,time_ms,model,{},Average\n", scenes.join(","));
    for metric in METRICS {
        for &t in &times {
            for r in reports {
                let Some(col) = r.schedule_ms.iter().position(|&x| x == t) else {
                    continue;
                };
                let mut cells = Vec::with_capacity(scenes.len());
                let mut present = Vec::new();
                for scene in &scenes {
                    match r.scenes.iter().find(|s| &s.scene == scene) {
                        Some(s) => {
                            let v = match metric {
                                "gjpe" => s.gjpe[col],
                                "ajpe" => s.ajpe[col],
                                _ => s.rfde[col],
                            };
                            present.push(v);
                            cells.push(format!("{v}"));
                        }
                        None => cells.push(String::new()),
                    }
                }
                writeln!(
                    out,
                    "{metric},{t},{},{},{}",
                    r.model,
                    cells.join(","),
                    fmt_mean(&present)
                )
                .unwrap();
            }
        }
    }
    out
}

/// `model,scene,second,ps_entropy,ps_kld`; second 0 is the observed second.
pub fn ps_curves(reports: &[MetricReport]) -> String {
    let mut out = String::from("model,scene,second,ps_entropy,ps_kld\n");
    for r in reports {
        for s in &r.scenes {
            for (t, (e, k)) in s.ps_entropy.iter().zip(&s.ps_kld).enumerate() {
                writeln!(out, "{},{},{t},{e},{k}", r.model, s.scene).unwrap();
            }
        }
    }
    out
}

pub fn report(cfg: &RunConfig, paths: &[PathBuf]) -> anyhow::Result<()> {
    let mut log = RunLog::start(cfg, "report")?;
    let mut reports = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read report {}: {e}", path.display())))?;
        let r = MetricReport::from_json(&text).with_context(|| path.display().to_string())?;
        reports.push(r);
    }
    let table = cfg.run.out_dir.join("table.csv");
    let curves = cfg.run.out_dir.join("ps_curves.csv");
    write_file(&table, comparison_table(&reports))?;
    write_file(&curves, ps_curves(&reports))?;
    log.line(&format!(
        "merged {} reports into {} and {}",
        reports.len(),
        table.display(),
        curves.display()
    ));
    Ok(())
}
