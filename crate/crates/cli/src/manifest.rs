use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Resolved configuration, file checksums and run statistics of one command.
/// Contains nothing time- or host-dependent.
#[derive(Debug, Default)]
pub struct Manifest {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    stats: toml::Table,
}

impl Manifest {
    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn stat(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.stats.insert(key.to_string(), value.into());
    }

    pub fn count(&mut self, key: &str, value: usize) {
        self.stat(key, value as i64);
    }

    pub fn write(&self, command: &str, cfg: &RunConfig) -> Result<PathBuf> {
        let mut out = String::new();
        writeln!(out, "# {command} run manifest")?;
        writeln!(out, "command = {command:?}")?;
        writeln!(out)?;
        for (section, files) in [("inputs", &self.inputs), ("outputs", &self.outputs)] {
            writeln!(out, "[{section}]")?;
            for f in files {
                writeln!(out, "{:?} = \"sha256:{}\"", f.display().to_string(), sha256_file(f)?)?;
            }
            writeln!(out)?;
        }
        // nest stats and the config echo so the manifest stays one TOML document
        let echo: toml::Table = cfg.to_toml()?.parse()?;
        let mut wrapper = toml::Table::new();
        wrapper.insert("stats".into(), toml::Value::Table(self.stats.clone()));
        wrapper.insert("config".into(), toml::Value::Table(echo));
        out.push_str(&toml::to_string(&wrapper)?);

        let path = cfg.paths.output_dir.join(format!("{command}.manifest.toml"));
        std::fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
