//! Run configuration: defaults, TOML file, `MFK_SEED`, then flags.

use std::fmt;
use std::path::{Path, PathBuf};

use mfk_core::metrics::{EvalSettings, FrameSchedule, LONG_TERM_MS, SHORT_TERM_MS};
use mfk_core::model::ModelConfig;
use mfk_core::synth::SynthConfig;
use mfk_core::training::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const SEED_ENV: &str = "MFK_SEED";

/// Bad invocation or configuration; the binary exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Processed dataset directory holding `manifest.toml` and NPY files.
    pub root: PathBuf,
    /// Directory of raw JSON exports read by `preprocess`.
    pub raw: PathBuf,
    pub downsample: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            root: PathBuf::from("data"),
            raw: PathBuf::from("raw"),
            downsample: mfk_core::data::DEFAULT_DOWNSAMPLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub samples: usize,
    pub persons: usize,
    /// Person counts cycle through `persons..=max_persons`.
    pub max_persons: usize,
    pub frames: usize,
    pub arena_extent: f64,
    pub min_separation: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let base = SynthConfig::default();
        SynthSection {
            samples: 20,
            persons: base.persons,
            max_persons: base.persons,
            frames: base.frames,
            arena_extent: base.arena_extent,
            min_separation: base.min_separation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_clip: Option<f64>,
    /// Frames between consecutive training windows.
    pub window_stride: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            alpha: t.alpha,
            beta1: t.beta1,
            beta2: t.beta2,
            eps: t.eps,
            gradient_clip: t.gradient_clip,
            window_stride: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    /// Predicted seconds per window (25 frames each).
    pub seconds: usize,
    pub stride: usize,
    pub times_ms: Vec<u32>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            seconds: 2,
            stride: 25,
            times_ms: SHORT_TERM_MS.iter().chain(&LONG_TERM_MS).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSection,
    pub synth: SynthSection,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub run: RunSection,
}

/// Keys that may be set even though the default leaves them out.
const OPTIONAL_KEYS: [&str; 1] = ["train.gradient_clip"];

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            alpha: self.train.alpha,
            beta1: self.train.beta1,
            beta2: self.train.beta2,
            eps: self.train.eps,
            seed: self.run.seed,
            gradient_clip: self.train.gradient_clip,
        }
    }

    pub fn synth_base(&self) -> SynthConfig {
        SynthConfig {
            persons: self.synth.persons,
            frames: self.synth.frames,
            arena_extent: self.synth.arena_extent,
            min_separation: self.synth.min_separation,
            seed: self.run.seed,
            ..SynthConfig::default()
        }
    }

    pub fn eval_settings(&self, model: &ModelConfig) -> EvalSettings {
        EvalSettings {
            schedule: FrameSchedule {
                times_ms: self.eval.times_ms.clone(),
                fps: 25.0,
            },
            root_index: model.root_index,
            in_frames: model.in_frames,
            seconds: self.eval.seconds,
            stride: self.eval.stride,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }
}

/// Pull `--section.key value` and `--section.key=value` pairs out of argv.
/// Everything else is left for clap.
pub fn extract_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    const SECTIONS: [&str; 6] = ["data", "synth", "model", "train", "eval", "run"];
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|k| k.split_once('.').is_some_and(|(s, _)| SECTIONS.contains(&s)));
        match dotted {
            Some(key) => match key.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let value = iter.next().unwrap_or_default();
                    overrides.push((key.to_string(), value));
                }
            },
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

fn known(defaults: &Table, path: &[&str]) -> bool {
    let joined = path.join(".");
    if OPTIONAL_KEYS.contains(&joined.as_str()) {
        return true;
    }
    let mut table = defaults;
    for (i, key) in path.iter().enumerate() {
        match table.get(*key) {
            Some(Value::Table(t)) if i + 1 < path.len() => table = t,
            Some(_) if i + 1 == path.len() => return true,
            _ => return false,
        }
    }
    false
}

fn merge(base: &mut Table, overlay: Table, defaults: &Table, prefix: &str) -> anyhow::Result<()> {
    for (key, value) in overlay {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        let parts: Vec<&str> = path.split('.').collect();
        match value {
            Value::Table(t) if base.get(&key).is_some_and(Value::is_table) => {
                let Some(Value::Table(inner)) = base.get_mut(&key) else {
                    unreachable!()
                };
                merge(inner, t, defaults, &path)?;
            }
            v => {
                if !known(defaults, &parts) {
                    return Err(usage(format!("unknown config key `{path}`")));
                }
                base.insert(key, v);
            }
        }
    }
    Ok(())
}

fn default_at<'a>(defaults: &'a Table, parts: &[&str]) -> Option<&'a Value> {
    let (last, head) = parts.split_last()?;
    let mut t = defaults;
    for p in head {
        t = t.get(*p)?.as_table()?;
    }
    t.get(*last)
}

fn set(table: &mut Table, defaults: &Table, key: &str, value: Value) -> anyhow::Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if !known(defaults, &parts) {
        return Err(usage(format!("unknown config key `{key}`")));
    }
    let float_field = matches!(default_at(defaults, &parts), Some(Value::Float(_)))
        || OPTIONAL_KEYS.contains(&key);
    let value = match value {
        Value::Integer(i) if float_field => Value::Float(i as f64),
        v => v,
    };
    let mut t = table;
    for part in &parts[..parts.len() - 1] {
        t = t
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| usage(format!("`{key}` does not name a config field")))?;
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Build the effective configuration. `overrides` are applied in order, so
/// later flags win.
pub fn resolve(
    file: Option<&Path>,
    env_seed: Option<&str>,
    overrides: &[(String, String)],
) -> anyhow::Result<RunConfig> {
    let defaults: Table = Table::try_from(RunConfig::default()).expect("defaults serialise");
    let mut table = defaults.clone();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let overlay: Table = text
            .parse()
            .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        merge(&mut table, overlay, &defaults, "")?;
    }
    if let Some(seed) = env_seed {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got {seed:?}")))?;
        set(&mut table, &defaults, "run.seed", Value::Integer(seed as i64))?;
    }
    for (key, raw) in overrides {
        set(&mut table, &defaults, key, parse_value(raw))?;
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e| usage(format!("invalid configuration: {e}")))?;
    cfg.model
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    cfg.train_config()
        .validate()
        .map_err(|e| usage(e.to_string()))?;
    if cfg.data.downsample == 0 || cfg.train.window_stride == 0 {
        return Err(usage("data.downsample and train.window_stride must be positive"));
    }
    Ok(cfg)
}
