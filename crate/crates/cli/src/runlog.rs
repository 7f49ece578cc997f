use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;

use crate::config::RunConfig;

/// Append-only `run.log` in the output directory. Lines are also echoed to
/// stderr.
pub struct RunLog {
    file: File,
}

impl RunLog {
    /// Opens the log, echoes the resolved configuration into it and writes
    /// `resolved_config.toml` next to it.
    pub fn start(cfg: &RunConfig, command: &str) -> anyhow::Result<RunLog> {
        let dir = &cfg.run.out_dir;
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let resolved = cfg.to_toml();
        let path = dir.join("resolved_config.toml");
        std::fs::write(&path, &resolved).with_context(|| format!("writing {}", path.display()))?;
        let path = dir.join("run.log");
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        let mut log = RunLog { file };
        log.line(&format!("mfk {command}"));
        for line in resolved.lines() {
            writeln!(log.file, "    {line}")?;
        }
        Ok(log)
    }

    pub fn line(&mut self, msg: &str) {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        let _ = writeln!(self.file, "[{now:.3}] {msg}");
        eprintln!("{msg}");
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
