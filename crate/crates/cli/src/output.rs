//! Atomic file output and the per-directory run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use postln_lens::Result;

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: &'static str,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub parameters: BTreeMap<String, Value>,
    pub wall_clock_secs: f64,
}

/// Collects what a command read and wrote, then drops a `manifest.json`
/// into its output directory.
pub struct Run {
    pub out_dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    pub fn new(command: &str, out_dir: &Path) -> Result<Run> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Run {
            out_dir: out_dir.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                tool_version: env!("CARGO_PKG_VERSION"),
                config: None,
                seed: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
                parameters: BTreeMap::new(),
                wall_clock_secs: 0.0,
            },
            started: Instant::now(),
        })
    }

    pub fn config(&mut self, p: &Path) {
        self.manifest.config = Some(p.to_path_buf());
    }

    pub fn seed(&mut self, s: u64) {
        self.manifest.seed = Some(s);
    }

    pub fn input(&mut self, p: &Path) {
        self.manifest.inputs.push(p.to_path_buf());
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) {
        self.manifest
            .parameters
            .insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
    }

    /// Writes `name` inside the output directory.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.manifest.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(mut self) -> Result<()> {
        self.manifest.wall_clock_secs = self.started.elapsed().as_secs_f64();
        let text = serde_json::to_string_pretty(&self.manifest).expect("serializable");
        write_atomic(&self.out_dir.join("manifest.json"), text.as_bytes())
    }
}
